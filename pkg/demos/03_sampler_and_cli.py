"""Heat-bath chains against the exact kernel, then the same run via the CLI."""
import json
import tempfile
from pathlib import Path

import numpy as np
from scipy.stats import chisquare

from latticesfe import cli
from latticesfe import free_energy as fe
from latticesfe.lattice import make_box
from latticesfe.models import BoundaryCondition, PotentialSpec, ising_potential, kernel

model = PotentialSpec(ising_potential(0.4, d=1))
w = make_box(1, 1)
thin = fe.mixing_thin(model, w)
res = fe.run_chain(model, w, 50_000, seed=3, thin=thin)
exact = kernel(model, w, BoundaryCondition.tail_filled(model, w)).weights
freq = res.counts / res.counts.sum()
print("thinning:", thin)
print("empirical:", np.round(freq, 4))
print("exact:    ", np.round(exact, 4))
print("chi-square p:", chisquare(res.counts, exact * res.counts.sum()).pvalue)

configs = Path(__file__).parent / "configs"
with tempfile.TemporaryDirectory() as tmp:
    code = cli.main(["sample", "--config", str(configs / "sample_chain.json"),
                     "--out-dir", tmp, "--seed", "3"])
    man = json.loads((Path(tmp) / "manifest.json").read_text())
    print("\ncli exit code", code, "| invariants:", [r["invariant"] for r in man["invariants"]])
    print((Path(tmp) / "samples.csv").read_text().splitlines()[:5])
