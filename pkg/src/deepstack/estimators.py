"""scikit-learn compatible estimators built on the functional core.

``DeepClassifier`` covers every model kind (DBN, stacked autoencoders,
plain MLP, discriminative pre-training) behind ``fit``/``predict`` so it
can be cloned, swept and dropped into pipelines. ``RBMTransformer`` and
``AutoencoderTransformer`` expose single pre-training layers as feature
extractors.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import deep
from .autoencoder import CorruptionSpec, SparsityConfig, train_autoencoder
from .data import Dataset
from .exceptions import ParameterError
from .nn import DropoutSpec, RegularizerSpec, init_network, layer_forward, predict_output
from .optim import EarlyStoppingConfig, OptimizerConfig
from .rbm import CdConfig, hidden_probs, train_rbm

MODEL_KINDS = ("dbn", "sae", "sdae", "mlp", "disc_pretrain")


def _check_unit_interval(X):
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError("features must lie in [0, 1]; scale raw intensities with normalize_255 first")
    return X


class DeepClassifier(ClassifierMixin, BaseEstimator):
    """Layer-wise pre-trained feed-forward classifier.

    Parameters
    ----------
    model_kind : {"dbn", "sae", "sdae", "mlp", "disc_pretrain"}
        ``dbn`` stacks RBMs trained with CD-k, ``sae`` plain autoencoders,
        ``sdae`` denoising autoencoders. ``mlp`` skips pre-training and
        ``disc_pretrain`` grows the net one supervised layer at a time.
    hidden_sizes : sequence of int
    hidden_activation : str
        Only ``mlp`` and ``disc_pretrain`` may use something other than sigmoid.
    output_activation : {"softmax", "sigmoid"}
    learning_rate, momentum : float
        Shared by pre-training and fine-tuning unless
        ``finetune_learning_rate`` is set.
    l2, l1 : float
        Weight penalties; ``l2`` doubles as RBM weight decay and applies to
        autoencoder pre-training too.
    retain_input, retain_hidden : float
        Dropout retain probabilities during fine-tuning.
    corruption, corruption_level :
        Input corruption for ``sdae``.
    patience : int or None
        Enables early stopping on a held-out ``validation_fraction``.
    random_state : int
        Seeds every random draw; equal seeds give bit-identical models.
    """

    def __init__(self, model_kind="sdae", hidden_sizes=(100, 100), hidden_activation="sigmoid",
                 output_activation="softmax",
                 loss="cross_entropy", learning_rate=1.0, finetune_learning_rate=None, momentum=0.0,
                 l2=0.0, l1=0.0, batch_size=100, epochs_pretrain=10, epochs_finetune=10,
                 retain_input=1.0, retain_hidden=1.0, sparsity_target=0.05, sparsity_weight=0.0,
                 corruption="masking", corruption_level=0.5, cd_k=1, finetune=True,
                 patience=None, min_delta=0.0, validation_fraction=0.0, init_sigma=None,
                 random_state=0):
        self.model_kind = model_kind
        self.hidden_sizes = hidden_sizes
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.loss = loss
        self.learning_rate = learning_rate
        self.finetune_learning_rate = finetune_learning_rate
        self.momentum = momentum
        self.l2 = l2
        self.l1 = l1
        self.batch_size = batch_size
        self.epochs_pretrain = epochs_pretrain
        self.epochs_finetune = epochs_finetune
        self.retain_input = retain_input
        self.retain_hidden = retain_hidden
        self.sparsity_target = sparsity_target
        self.sparsity_weight = sparsity_weight
        self.corruption = corruption
        self.corruption_level = corruption_level
        self.cd_k = cd_k
        self.finetune = finetune
        self.patience = patience
        self.min_delta = min_delta
        self.validation_fraction = validation_fraction
        self.init_sigma = init_sigma
        self.random_state = random_state

    # configuration helpers

    def _optimizer(self, epochs, learning_rate, m):
        return OptimizerConfig("minibatch", learning_rate, self.momentum, min(int(self.batch_size), m),
                               int(epochs), int(self.random_state))

    def _stack_spec(self, m) -> deep.StackSpec:
        hidden = [int(h) for h in self.hidden_sizes]
        if self.model_kind == "dbn":
            cd = CdConfig(k=int(self.cd_k), learning_rate=self.learning_rate, momentum=self.momentum,
                          weight_decay=self.l2, epochs=int(self.epochs_pretrain),
                          batch_size=min(int(self.batch_size), m), seed=int(self.random_state))
            return deep.StackSpec(hidden, "rbm", cd=cd)
        corruption = (CorruptionSpec(self.corruption, self.corruption_level)
                      if self.model_kind == "sdae" else CorruptionSpec())
        sparsity = SparsityConfig(self.sparsity_target, self.sparsity_weight) if self.sparsity_weight else None
        return deep.StackSpec(hidden, "autoencoder",
                              ae_opt=self._optimizer(self.epochs_pretrain, self.learning_rate, m),
                              sparsity=sparsity, corruption=corruption,
                              reg=RegularizerSpec(self.l2, 0.0))

    def _validate(self):
        if self.model_kind not in MODEL_KINDS:
            raise ParameterError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if not len(self.hidden_sizes) and self.model_kind != "mlp":
            raise ParameterError(f"{self.model_kind} needs at least one hidden layer")
        if self.model_kind in ("dbn", "sae", "sdae") and self.hidden_activation != "sigmoid":
            raise ParameterError(f"{self.model_kind} stacks produce sigmoid hidden units")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ParameterError("validation_fraction must lie in [0, 1)")

    # estimator API

    def fit(self, X, y):
        self._validate()
        X, y = check_X_y(X, y, dtype=np.float64)
        _check_unit_interval(X)
        check_classification_targets(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        data = Dataset.from_arrays(X, y_idx, n_classes=len(self.classes_))

        val = None
        if self.validation_fraction > 0:
            order = rng.permutation(len(data))
            n_val = max(1, int(round(self.validation_fraction * len(data))))
            val, data = data.subset(order[:n_val]), data.subset(order[n_val:])
        m = len(data)
        reg = RegularizerSpec(self.l2, self.l1)
        dropout = DropoutSpec(self.retain_input, self.retain_hidden)
        early = EarlyStoppingConfig(int(self.patience), self.min_delta) if self.patience is not None else None
        ft_rate = self.finetune_learning_rate or self.learning_rate
        ft_opt = self._optimizer(self.epochs_finetune if self.finetune else 0, ft_rate, m)
        n_classes = len(self.classes_)
        self.pretrain_report_ = None
        self.histories_ = []

        if self.model_kind == "disc_pretrain":
            sizes = [X.shape[1], *[int(h) for h in self.hidden_sizes], n_classes]
            stage_opt = self._optimizer(self.epochs_pretrain, self.learning_rate, m)
            net, self.histories_ = deep.discriminative_pretrain(
                sizes, data, val, stage_opt, rng, reg, dropout,
                finetune_opt=ft_opt if self.finetune else None, early_stop=early, loss_kind=self.loss,
                output_activation=self.output_activation, init_sigma=self.init_sigma,
                hidden_activation=self.hidden_activation)
        else:
            if self.model_kind == "mlp":
                sizes = [X.shape[1], *[int(h) for h in self.hidden_sizes], n_classes]
                net = init_network(sizes, sigma=self.init_sigma, rng=rng,
                                   hidden_activation=self.hidden_activation,
                                   output_activation=self.output_activation)
            else:
                layers, self.pretrain_report_ = deep.pretrain_stack(data.X, self._stack_spec(m), rng)
                net = deep.unroll_to_classifier(layers, n_classes, self.output_activation, rng)
            self.pretrained_net_ = net.copy()
            if ft_opt.epochs > 0:
                net, hist = deep.finetune(net, data, val, ft_opt, reg, dropout, early, rng, self.loss)
                self.histories_.append(hist)
        self.net_ = net
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        out = predict_output(self.net_, X)
        if self.net_.output_activation != "softmax":
            out = out / np.maximum(out.sum(axis=1, keepdims=True), 1e-300)
        return out

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        return self.classes_[deep.predict(self.net_, X)]

    def error_rate(self, X, y) -> float:
        return 1.0 - self.score(X, y)

    @property
    def history_(self):
        return self.histories_[-1] if self.histories_ else None


class RBMTransformer(TransformerMixin, BaseEstimator):
    """Binary RBM trained with CD-k; ``transform`` gives hidden probabilities."""

    def __init__(self, n_components=100, learning_rate=0.1, momentum=0.0, weight_decay=0.0,
                 batch_size=100, n_iter=10, k=1, random_state=0):
        self.n_components = n_components
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.n_iter = n_iter
        self.k = k
        self.random_state = random_state

    def fit(self, X, y=None):
        X = _check_unit_interval(check_array(X, dtype=np.float64))
        self.n_features_in_ = X.shape[1]
        cfg = CdConfig(k=self.k, learning_rate=self.learning_rate, momentum=self.momentum,
                       weight_decay=self.weight_decay, epochs=self.n_iter,
                       batch_size=min(self.batch_size, X.shape[0]), seed=self.random_state)
        self.rbm_, self.report_ = train_rbm(X, self.n_components, cfg, np.random.default_rng(self.random_state))
        return self

    def transform(self, X):
        check_is_fitted(self, "rbm_")
        return hidden_probs(self.rbm_, check_array(X, dtype=np.float64))


class AutoencoderTransformer(TransformerMixin, BaseEstimator):
    """Sigmoid autoencoder (optionally sparse/denoising); ``transform`` encodes."""

    def __init__(self, n_hidden=100, learning_rate=0.1, momentum=0.0, l2=0.0, batch_size=100,
                 n_epochs=10, sparsity_target=0.05, sparsity_weight=0.0, corruption="none",
                 corruption_level=0.0, random_state=0):
        self.n_hidden = n_hidden
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.l2 = l2
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.sparsity_target = sparsity_target
        self.sparsity_weight = sparsity_weight
        self.corruption = corruption
        self.corruption_level = corruption_level
        self.random_state = random_state

    def fit(self, X, y=None):
        X = _check_unit_interval(check_array(X, dtype=np.float64))
        self.n_features_in_ = X.shape[1]
        opt = OptimizerConfig("minibatch", self.learning_rate, self.momentum, min(self.batch_size, X.shape[0]),
                              self.n_epochs, self.random_state)
        sparsity = SparsityConfig(self.sparsity_target, self.sparsity_weight) if self.sparsity_weight else None
        self.autoencoder_, self.history_ = train_autoencoder(
            X, self.n_hidden, sparsity, CorruptionSpec(self.corruption, self.corruption_level), opt,
            np.random.default_rng(self.random_state), RegularizerSpec(self.l2, 0.0))
        return self

    def transform(self, X):
        check_is_fitted(self, "autoencoder_")
        return self.autoencoder_.encode(check_array(X, dtype=np.float64))

    def inverse_transform(self, H):
        check_is_fitted(self, "autoencoder_")
        return layer_forward(np.asarray(H, dtype=np.float64), self.autoencoder_.decoder, "sigmoid")

