"""2D FDTD acoustic simulation to true-stereo impulse responses."""

__version__ = "0.1.0"

from .ir_extraction import (  # noqa: E402
    QuadIR,
    assemble_quad,
    auralize,
    extract_ir,
    orientation_gains,
    write_wav,
)
from .scene import (  # noqa: E402
    GridSpec,
    ListenerSpec,
    MediumParams,
    ProbeLayout,
    SceneConfig,
    SceneError,
    build_grid,
    parse_scene,
    place_probes,
    rasterize_obstacles,
)
from .signals import (  # noqa: E402
    RickerSpec,
    Signal,
    SweepSpec,
    convolve,
    generate_ess,
    generate_ricker,
    inverse_filter,
    resample,
)
from .solver import (  # noqa: E402
    DampingProfile,
    FieldState,
    InstabilityError,
    TimeSpec,
    build_pml,
    compute_time_step,
    run_simulation,
    step,
)
