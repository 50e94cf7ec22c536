from .boundary import (
    BoundaryResult,
    LiftResult,
    boundary_even,
    boundary_odd,
    exactness_probe,
    regrid,
    to_quotient_class,
    unitary_lift,
    z_loop,
)
from .extensions import (
    MappingCone,
    SemisplitExtension,
    embed_unital_class,
    linear_profile,
    make_cone_extension,
    make_mapping_cone,
)
from .toeplitz import BandedToeplitz, ToeplitzPairing, toeplitz_pair, z_loop_lift
