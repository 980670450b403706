"""Smallest coordinates of eigenvectors of real and complex Gaussian matrices.

For each n, every (real) unit eigenvector is sorted by magnitude and the
k-th smallest coordinate, k = ceil(n/8), is rescaled by n^1.5/k (real) or
n/sqrt(k) (complex).  If there are no gaps in delocalization these ratios
stay of order one as n grows.
"""

from nogaps.harness import run_experiment

sizes = [32, 64, 128]

for kind, field in (("eigvec_nogaps_real", "real"), ("eigvec_nogaps_complex", "complex")):
    s = run_experiment(dict(kind=kind, n_list=sizes, k_fraction=0.125, trials=20, field=field, master_seed=3))
    print(kind, f"({s.runtime:.1f} s)")
    for r in s.ratios:
        print(f"  n={r['n']:4d} k={r['k']:3d}  median of trial min {r['median_of_trial_min']:.3f}"
              f"  median of trial median {r['median_of_trial_median']:.3f}  eigvecs {r['eigvecs']}")
    for v in s.violations:
        print(f"  n={v['n']:4d}  {v['violating_eigvecs']} of {v['eigvecs']} eigenvectors below the C={v['C']:g} bound")
