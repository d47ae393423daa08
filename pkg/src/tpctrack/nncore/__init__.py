from .layers import (
    ACTIVATIONS,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2D,
    layer_from_spec,
)
from .losses import (
    add_l2_grads,
    binary_cross_entropy,
    binary_cross_entropy_grad,
    categorical_cross_entropy,
    categorical_cross_entropy_grad,
    l2_penalty,
    regularized_loss,
)
from .network import Network, network_from_specs
from .optim import SAG, SGD, Adam, sag_learning_rate
from .train import (
    EarlyStopping,
    TrainConfig,
    TrainHistory,
    TrainingError,
    forward_in_batches,
    train,
)
