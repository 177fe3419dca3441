from .cnn import (CnnModel, cnn_forward, cnn_loss_and_grads, cnn_predict, cnn_train, init_cnn,
                  load_cnn, save_cnn)
from .lda import LdaModel, lda_decision, lda_fit, lda_predict
from .optim import AdamState, TrainConfig, adam_step

__all__ = ["AdamState", "CnnModel", "LdaModel", "TrainConfig", "adam_step", "cnn_forward",
           "cnn_loss_and_grads", "cnn_predict", "cnn_train", "init_cnn", "lda_decision", "lda_fit",
           "lda_predict", "load_cnn", "save_cnn"]
