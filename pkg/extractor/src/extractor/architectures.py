"""Supported pre-trained architectures and their canonical input pipelines.

Each entry names a tf.keras.applications constructor, its preprocess
function, the expected square input size and the width of the feature
vector taken from the layer feeding the final softmax dense layer (the
pooled/fully-connected activation the classifier head consumes).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ArchSpec:
    name: str
    input_size: int
    feature_dim: int
    keras_module: str   # attribute under tf.keras.applications
    keras_class: str


ARCHITECTURES = {
    "densenet": ArchSpec("densenet", 224, 1024, "densenet", "DenseNet121"),
    "inceptionresnetv2": ArchSpec(
        "inceptionresnetv2", 299, 1536, "inception_resnet_v2", "InceptionResNetV2"
    ),
    "inceptionv3": ArchSpec("inceptionv3", 299, 2048, "inception_v3", "InceptionV3"),
    "mobilenetv2": ArchSpec("mobilenetv2", 224, 1280, "mobilenet_v2", "MobileNetV2"),
    "nasnetlarge": ArchSpec("nasnetlarge", 331, 4032, "nasnet", "NASNetLarge"),
    "resnet50": ArchSpec("resnet50", 224, 2048, "resnet50", "ResNet50"),
    "vgg19": ArchSpec("vgg19", 224, 4096, "vgg19", "VGG19"),
    "xception": ArchSpec("xception", 299, 2048, "xception", "Xception"),
}


def get_arch(name: str) -> ArchSpec:
    key = name.lower()
    if key not in ARCHITECTURES:
        known = ", ".join(sorted(ARCHITECTURES))
        raise ValueError(f"unknown architecture {name!r}; supported: {known}")
    return ARCHITECTURES[key]


def load_model(spec: ArchSpec, weights: str | None = "imagenet"):
    """Build the classifier and a two-headed inference model.

    Returns (model, preprocess_fn) where model maps preprocessed batches to
    [features, softmax probabilities]. Features are the input tensor of the
    final dense layer, i.e. the network with its softmax classification
    layer removed.
    """
    import tensorflow as tf  # deferred: slow import, keep CLI --help fast

    module = getattr(tf.keras.applications, spec.keras_module)
    ctor = getattr(module, spec.keras_class)
    base = ctor(weights=weights)
    feature_tensor = base.layers[-1].input
    model = tf.keras.Model(inputs=base.input, outputs=[feature_tensor, base.output])
    return model, module.preprocess_input
