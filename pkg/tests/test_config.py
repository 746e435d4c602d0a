import pytest

from mimc.config import ConfigError, load_config, parse_config, parse_value, section


def test_parse_values():
    assert parse_value("3") == 3 and parse_value("2.5") == 2.5
    assert parse_value("1, 2,3") == [1, 2, 3]
    assert parse_value("true") is True
    assert parse_value("mimc-td") == "mimc-td"


def test_parse_config_and_section(tmp_path):
    text = "# rates\nrates.w = 2\nrates.s = 4  # trailing\n\nproblem.sigma=0.16\nrates.beta = 2, 2\n"
    conf = parse_config(text)
    assert conf == {"rates.w": 2, "rates.s": 4, "problem.sigma": 0.16, "rates.beta": [2, 2]}
    assert section(conf, "rates") == {"w": 2, "s": 4, "beta": [2, 2]}
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert load_config(path) == conf


@pytest.mark.parametrize("text,line", [("a = 1\nnovalue\n", 2), ("a b = 1", 1), ("x =", 1)])
def test_config_errors_report_line(text, line):
    with pytest.raises(ConfigError, match=f":{line}:"):
        parse_config(text, "f.cfg")
