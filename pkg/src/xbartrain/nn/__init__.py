"""Training engine whose linear and convolution layers run through the crossbar model."""

from .crossbar import ENGINE_NAMES, CrossbarCore, HardwareSpec
from .data import Dataset, batch_order, load_csv, load_idx, make_blobs, read_idx, split, write_idx
from .layers import CrossbarConv2d, CrossbarLinear, Flatten, MaxPool2d, ReLU, Sequential
from .reference import DigitalMLP, softmax_xent
from .tensor import QTensor, quantize
from .train import TrainState, build_model, calibrate_adcs, evaluate, init_weights, predict, train_epoch

__all__ = [
    "ENGINE_NAMES", "CrossbarConv2d", "CrossbarCore", "CrossbarLinear", "Dataset", "DigitalMLP",
    "Flatten", "HardwareSpec", "MaxPool2d", "QTensor", "ReLU", "Sequential", "TrainState",
    "batch_order", "build_model", "calibrate_adcs", "evaluate", "init_weights", "load_csv",
    "load_idx", "make_blobs", "predict", "quantize", "read_idx", "softmax_xent", "split",
    "train_epoch", "write_idx",
]
