pub mod certify;
pub mod gamma_q;
pub mod gegenbauer;
pub mod lq;
pub mod multiplier;

pub use gamma_q::{gamma_q, GammaQ};
pub use gegenbauer::{gegenbauer_expand, gegenbauer_expand_even, GegenbauerSeries};
pub use lq::{ft_lq_norm_power, TransformValue};
pub use multiplier::{
    fourier_multiplier, ft_homogeneous_revolution, radon_direct, radon_multipliers, radon_sphere, validate_multipliers,
    HomogeneousBase, HomogeneousFn, MultiplierValidation,
};
pub use certify::{
    intersection_body_test, parseval_check, section_volume_fourier, FourierSection, IntersectionTest, ParsevalReport, Verdict,
};
