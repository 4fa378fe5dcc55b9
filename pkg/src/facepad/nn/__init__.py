from .functional import (
    BCE_EPS,
    batchnorm_backward,
    batchnorm_forward,
    bce_backward,
    bce_loss,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_forward,
    maxpool_backward,
    maxpool_forward,
    sigmoid,
)
from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2D,
    ReLU,
    Sequential,
    Sigmoid,
    Standardize,
)
from .layerspec import LayerSpec, ParamRow, build_layers, count_params
from .optim import OptimizerState, sgd_step
