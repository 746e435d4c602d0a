"""How much work does each method need?  A tour of the rate model.

We describe a problem by per-direction rates:
  w      weak rate     |E[Delta_alpha S]| ~ prod beta^(-w alpha)
  s      strong rate   Var[Delta_alpha S] ~ prod beta^(-s alpha)
  gamma  work rate     cost of one sample ~ prod beta^(gamma alpha)

From these, the rate model predicts the TOL exponent and log power of the
total work for MLMC, MIMC with full-tensor sets and MIMC with optimal
total-degree sets.  Run with:  python demos/01_predict_complexity.py
"""
from mimc import RateParameters, complexity_class, ft_complexity, mlmc_complexity


def show(label, rates):
    td = complexity_class(rates)
    ft = ft_complexity(rates)
    ml = mlmc_complexity(rates)
    print(f"\n{label}")
    print(f"  total-degree case: {td.case}")
    for rep in (ml, ft, td):
        note = "" if rep.applicable else f"  (not applicable: {rep.violated_condition})"
        print(f"  {rep.method:8s} work ~ TOL^-{rep.tol_exponent:.3f} * log(1/TOL)^{rep.log_power:g}{note}")


# A 3-direction PDE-like problem: variance decays faster than the cost grows.
show("d=3, w=2, s=4, gamma=2  (s > gamma: the Monte Carlo rate TOL^-2)",
     RateParameters.isotropic(3, 2.0, w=2, s=4, gamma=2))

# Balanced per-direction decay and cost: MIMC-TD keeps TOL^-2 but pays a log
# factor, while MLMC, refining all directions together, sees d*gamma > s.
show("d=3, w=1, s=2, gamma=2  (s = gamma)",
     RateParameters.isotropic(3, 2.0, w=1, s=2, gamma=2))

# Cost outruns variance decay.  MLMC pays the full d*gamma; MIMC only gamma.
show("d=3, w=2, s=2, gamma=3  (s < gamma)",
     RateParameters.isotropic(3, 2.0, w=2, s=2, gamma=3))

print("\nThe same numbers are available from the command line:")
print("  mimc predict --set rates.d=3 --set rates.w=2 --set rates.s=4 --set rates.gamma=2")
