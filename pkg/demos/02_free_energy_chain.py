"""Specific free energy of the Ising chain's Gibbs state.

The infinite-volume Gibbs measure of the 1d Ising chain is exact via the
transfer matrix.  Its relative entropy against the box kernels, per site,
should shrink like diam/|box|, and against the best mixture of kernels it
should vanish.  We also show a field that is *not* Gibbs for comparison.
"""
from latticesfe import free_energy as fe
from latticesfe.lattice import Window, make_box
from latticesfe.models import PotentialSpec, ising_potential

beta = 0.4
model = PotentialSpec(ising_potential(beta, d=1))
gibbs = fe.IsingChainField(beta)

rep = fe.sfe_report(gibbs, model, 6)
print(rep.to_csv())
print("sandwich violations:", rep.sandwich_violations())

# a product field is far from this specification
prod = fe.ProductField(model.alphabet, None, 1)
print("\nproduct field terms:", [round(fe.sfe_term(prod, model, n), 4) for n in range(4)])
print("dlr residual of the product field:",
      round(fe.dlr_residual(prod.marginal(make_box(1, 1)), model, Window.of([(0,)])), 4))
print("dlr residual of the Gibbs field:",
      fe.dlr_residual(gibbs.marginal(make_box(1, 1)), model, Window.of([(0,)])))
