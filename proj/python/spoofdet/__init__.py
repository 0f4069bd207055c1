"""Face presentation-attack-detection toolkit: C++ core with Python bindings."""

try:
    from . import _core as _c
except ImportError:  # in-tree builds leave _core next to the package dir
    import _core as _c

__version__ = _c.__version__
SpoofdetError = _c.SpoofdetError
coalbp_histogram = _c.coalbp_histogram
deep_channel_total = _c.deep_channel_total
deep_layer_table = _c.deep_layer_table
descriptor_length = _c.descriptor_length
descriptor_vector = _c.descriptor_vector
eer = _c.eer
evaluate = _c.evaluate
fusion_layer_table = _c.fusion_layer_table
gradient_battery = _c.gradient_battery
lbp_histogram = _c.lbp_histogram
lpq_histogram = _c.lpq_histogram
wide_layer_table = _c.wide_layer_table

__all__ = [
    "__version__",
    "SpoofdetError",
    "coalbp_histogram",
    "deep_channel_total",
    "deep_layer_table",
    "descriptor_length",
    "descriptor_vector",
    "eer",
    "evaluate",
    "fusion_layer_table",
    "gradient_battery",
    "lbp_histogram",
    "lpq_histogram",
    "wide_layer_table",
]
