"""Speaker verification evaluation toolkit.

Trial and embedding I/O, log-Mel features, audio augmentation, margin-loss
and pooling math with analytic gradients, cosine/AS-Norm/MSA scoring,
EER/minDCF metrics, logistic-regression fusion, and a pipeline CLI.
"""

__version__ = "0.1.0"

EMB_FORMAT_VERSION = "EMB1"
MEL_FORMAT_VERSION = "MEL1"
