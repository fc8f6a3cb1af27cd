"""
What the scaler + PCA front end does
====================================

Scale each IMU channel to zero mean and unit variance, rotate onto the
principal axes and check the algebra numerically.
"""
import numpy as np

from imusurf.dataset import SurfaceClass
from imusurf.preprocess import pca_fit, pca_transform, preprocessor_fit, scaler_fit, scaler_transform
from imusurf.synth import synth_series

x = np.concatenate([synth_series(c, 1000, seed=2).data for c in SurfaceClass])
print("raw channel means:", x.mean(axis=0).round(2))
print("raw channel stds: ", x.std(axis=0).round(2))

scaler = scaler_fit(x)
z = scaler_transform(scaler, x)
print("scaled means:", np.abs(z.mean(axis=0)).max(), " scaled stds:", z.std(axis=0).round(12))

pca = pca_fit(z, k=6)
print("component gram matrix is identity:", np.allclose(pca.components @ pca.components.T, np.eye(6)))
y = pca_transform(pca, z)
cov = np.cov(y, rowvar=False)
print("variance per component:", np.diag(cov).round(3))
print("largest off-diagonal covariance:", np.abs(cov - np.diag(np.diag(cov))).max())

# keeping fewer components loses the low-variance directions
pp3 = preprocessor_fit(x, k=3)
print("k=3 keeps", pp3.pca.explained_variance.sum() / pca.explained_variance.sum(), "of the variance")
