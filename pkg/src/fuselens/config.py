"""Shipped hyperparameter defaults."""

# composite objective weights
ALPHA = 0.005
BETA = 1.0

# semantic loss patches (training objective)
SL_PATCH = 5
SL_STRIDE = 3
BACKGROUND_THRESHOLD = 0.01

# MEF-SSIM patches and stabilizing constant
MEF_PATCH = 7
MEF_STRIDE = 1
MEF_C = 9e-4

# evaluation windows
SL_METRIC_PATCH = 3
SL_METRIC_STRIDE = 1
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MI_BINS = 256

# pixel-space optimizer
LEARNING_RATE = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MAX_ITERS = 300
TOL = 1e-6
