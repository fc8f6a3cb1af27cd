"""
Training a surface classifier on synthetic IMU data
===================================================

Generate five synthetic surfaces, split them without window leakage, fit the
scaler + PCA front end on the training part only, train the small GRU and
report accuracy. Runs in about a minute.
"""
import tempfile

from imusurf.dataset import load_manifest
from imusurf.evaluation import evaluate, format_accuracy_table, format_class_table
from imusurf.model import ArchSpec, count_parameters
from imusurf.pipeline import fit_on_series, load_split
from imusurf.synth import SynthSpec, gen_synth
from imusurf.training import TrainConfig, train

out = tempfile.mkdtemp(prefix="imusurf_demo_")
gen_synth(SynthSpec(samples_per_class=2000, seed=0), out)

# 80/20 split; each single-file class is cut with a 99-sample gap so that no
# sample appears in both a training and a test window
data = load_split(load_manifest(f"{out}/manifest.txt"), test_fraction=0.2, seed=0)
print("train windows:", len(data.train_windows()), " test windows:", len(data.test_windows()))

# the preprocessor only ever sees training samples
pp = fit_on_series(data.train_series)
print("explained variance:", pp.pca.explained_variance.round(3))

spec = ArchSpec.small()
print("parameters:", count_parameters(spec))
model, history = train(data.train_windows(), data.test_windows(), pp, spec,
                       TrainConfig(epochs=4, learning_rate=3e-3, seed=0))
for rec in history:
    print(rec.format())

ev = evaluate(model, pp, data.test_windows())
print(format_accuracy_table({"853p/ext": ev}))
print()
print(format_class_table(ev.metrics))
