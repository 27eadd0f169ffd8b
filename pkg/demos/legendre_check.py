from geothermo.contact import (PhasePoint, contact_nondegeneracy, legendre_invariance_check,
                               total_legendre)

z = PhasePoint(5, (1, 2), (3, 4))
print("F(z) =", total_legendre(z))                       # (-6, (3, 4), (-1, -2))
print("F^4(z) == z:", total_legendre(total_legendre(total_legendre(total_legendre(z)))) == z)
print("Theta ^ dTheta^2 coefficient:", contact_nondegeneracy(z))

for kind in ["gtd-first-order", "gtd-second-order", "hessian", "flat"]:
    r = legendre_invariance_check(kind, n=2, trials=100)
    print(f"{kind:17s} {r.verdict}  max deviation {r.max_deviation:.3g}")
