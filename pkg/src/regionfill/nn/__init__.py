from regionfill.nn.regionwise import (
    RegionwiseConv2d,
    ShapeError,
    as_mask_tensor,
    mask_pyramid,
    regionwise_conv_gradients,
)
from regionfill.nn.generator import (
    EncoderDecoder,
    GeneratorConfig,
    TwoStageGenerator,
    build_generator,
    build_global_perceiving_net,
    build_semantic_inferring_net,
)
from regionfill.nn.discriminator import (
    DiscriminatorConfig,
    RegionwiseDiscriminator,
    build_discriminator,
)

__all__ = [
    "RegionwiseConv2d",
    "ShapeError",
    "as_mask_tensor",
    "mask_pyramid",
    "regionwise_conv_gradients",
    "EncoderDecoder",
    "GeneratorConfig",
    "TwoStageGenerator",
    "build_generator",
    "build_global_perceiving_net",
    "build_semantic_inferring_net",
    "DiscriminatorConfig",
    "RegionwiseDiscriminator",
    "build_discriminator",
]
