"""
Streaming slippery-surface alerts
=================================

Train a quick model, then walk a simulated robot from concrete onto ice and
push samples one at a time into the detector. The alert fires after three
consecutive slippery verdicts and then stays latched until reset.
"""

from imusurf.dataset import SurfaceClass, windows
from imusurf.model import ArchSpec
from imusurf.pipeline import fit_on_series
from imusurf.stream import SlipperyDetector
from imusurf.synth import synth_series, transition_series
from imusurf.training import TrainConfig, train

series = [synth_series(c, 1200, seed=1) for c in SurfaceClass]
pp = fit_on_series(series)
train_windows = [w for s in series for w in windows(s)[::2]]
model, _ = train(train_windows, [], pp, ArchSpec.small(), TrainConfig(epochs=4, learning_rate=3e-3))

# 150 samples of concrete, then ice
walk = transition_series(SurfaceClass.CONCRETE, SurfaceClass.ICE, 150, 250, seed=7)
det = SlipperyDetector(model, pp)
for i, sample in enumerate(walk):
    decision, alert = det.push(sample)
    if decision is not None and i % 25 == 0:
        print(f"sample {i:3d}: {decision.predicted.label:<13s} p={max(decision.probs):.3f}")
    if alert is not None:
        print(f"sample {i:3d}: ALERT {alert.message}")

# reset re-arms the alert but keeps the last 100 samples
det.reset()
print("latched after reset:", det.alert_latched, " buffered:", len(det.buffer))
for sample in walk[-3:]:
    _, alert = det.push(sample)
print("alert again on ice:", alert is not None)
