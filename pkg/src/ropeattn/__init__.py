"""Near-linear-time rotary-weighted attention via FFT-backed structured matrices."""

from .engine import (
    AttentionOutput,
    attention_components,
    exact_attention,
    exp_attention_matvec,
    fast_attention,
    linear_attention,
    linear_attention_oracle,
    linf_error,
)
from .errors import ApproximationError, NormalizationError, ResourceLimitError
from .fourier import ComplexBuffer, fft_forward, fft_inverse, next_pow2
from .polyexp import (
    ExpPolynomial,
    MonomialMap,
    MonomialTable,
    build_exp_poly,
    build_monomial_table,
    enumerate_monomials,
    eval_poly,
    monomial_coefficient,
)
from .structured import (
    CirculantGenerator,
    RescaledToeplitz,
    ToeplitzGenerator,
    circulant_matvec,
    hadamard,
    hadamard_chain_matvec,
    rescaled_matvec,
    to_dense,
    toeplitz_matvec,
)
from .weights import (
    AttentionInstance,
    SupportSet,
    ValidationReport,
    WeightSequence,
    build_component,
    exponent_bound,
    rope_weights,
    validate_instance,
)

__version__ = "0.1.0"
