"""
Synthetic Gaussian clusters: AUC of the four losses
===================================================

Points are drawn around ``n_c`` random centres in a 256-D unit cube with
noise variance ``tau``. A Siamese MLP is trained on matching and
non-matching pairs and scored by the AUC of its distances. The raw
``||x1 - x2||`` baseline needs no training.

The full experiment (10 repetitions, 10,000 pairs, 30 epochs) runs from the
command line with ``patchbatch synth``; this script uses a smaller setting.
"""

from patchbatch.synthgauss import SynthConfig, TrainSettings, run_experiment

config = SynthConfig(n_c=10, tau=3.0, n_train=4000, n_test=4000, seed=1)
settings = TrainSettings(epochs=10)

# Margins fixed by hand here; leaving them out triggers the tuning sweep.
margins = {"spring": 30.0, "spring_sd": 30.0, "centrifuge": 30.0, "centrifuge_sd": 30.0}
variants = ["baseline", "spring", "spring_sd", "centrifuge", "centrifuge_sd"]
report = run_experiment(config, variants, reps=2, settings=settings, margins=margins,
                        progress=lambda r: print(f"  rep {r.rep} {r.variant:14s} AUC {r.auc:.4f}"))

for row in report.summary():
    print(f"{row['variant']:14s} mean AUC {row['mean_auc']:.4f} +- {row['sd_auc']:.4f}")
