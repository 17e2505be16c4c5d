"""Streaming anomaly detection for groups of correlated sensors.

A cheap linear screen (PCA over sliding windows) watches every time step;
an LSTM encoder-decoder is invoked to confirm or clear suspicious steps.
The package also ships the synthetic fault lab, evaluation sweeps and
latency benchmarks used to compare the detectors.
"""

__version__ = "0.1.0"

from streamsentry.windows import SensorWindow, NormStats, NotFullError
from streamsentry.pca import PcaModel, fit_pca
from streamsentry.lstm_ae import AeConfig, AeModel, train_autoencoder
from streamsentry.distances import DetectorThresholds, distance_matrix, calibrate
from streamsentry.detectors import PcaDetector, AeDetector, HybridDetector, run_stream

__all__ = [
    "SensorWindow",
    "NormStats",
    "NotFullError",
    "PcaModel",
    "fit_pca",
    "AeConfig",
    "AeModel",
    "train_autoencoder",
    "DetectorThresholds",
    "distance_matrix",
    "calibrate",
    "PcaDetector",
    "AeDetector",
    "HybridDetector",
    "run_stream",
]
