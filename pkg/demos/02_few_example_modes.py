"""Few-example training with related videos.

Ten positives per event are drawn from the training pool, either alone (P10)
or together with near-miss videos (R10) or with pseudo-positives produced by
the zero-example detectors (R10p). Near misses here are faint copies of the
positives: they show the right concepts, only weaker and noisier.

    python demos/02_few_example_modes.py        # takes about a minute
"""
from zeroevent import pipeline as pl

data = pl.make_synthetic(pl.SyntheticSpec(sigma=0.4, eval_related=0, related_shift=0.2))
cfg = pl.load_config(None, {"draws": 10, "C_grid": "2^-1,2^1,2^3,2^5",
                            "gamma_grid": "2^-3,2^-1,2^1", "c_grid": "0.1,0.3,0.5,1"},
                     check_paths=False)
runner = pl.ModeRunner(cfg, data)
results = [runner.run(m) for m in ("T0", "T10-pseudo", "P10", "R10", "R10p", "R10+R10p", "T0+R10")]
print(pl.modes_table(results))

