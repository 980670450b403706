"""Randomized Hilbert-Schmidt nets and tails of s_min for projected matrices."""

from nogaps.nets import NetSpec, build_verified_net, hs_concentration_check, smin_tail_experiment

# nets at several resolutions; the worst nearest-image distance stays well below t
for t in (0.5, 0.7, 1.0):
    spec = NetSpec(r=4, t=t, card_constant=8)
    net, rep, attempts = build_verified_net(spec, seed=0, n_pairs=500)
    print(f"r=4 t={t}: {len(net)} points, coverage {rep.fraction:.3f}, worst {rep.min_dist.max():.3f}, builds {attempts}")

# HS norm of projected matrices concentrates around sqrt(r d)
for d, r in ((4, 4), (8, 8), (16, 8)):
    h = hs_concentration_check(d, r, 5000, seed=1)
    print(f"d={d} r={r}: mean ||M||^2 {h.mean_hs2:.1f} vs rd={h.rd}, quantiles {h.quantiles}")

# the s_min tail decays like t^(d-r)
for d, r in ((6, 3), (8, 4)):
    c = smin_tail_experiment(d, r, n_trials=30_000, seed=2)
    probs = ", ".join(f"{p:.2e}" for p in c.probs)
    print(f"d={d} r={r}: P(s_min <= sqrt(d) t) = [{probs}], slope {c.slope:.2f} (d - r = {d - r})")
