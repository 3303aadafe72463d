//! Polynomial and transfer-function arithmetic, frequency analysis and integration.

pub mod freq;
pub mod mimo;
pub mod ode;
pub mod poly;
pub mod ss;
pub mod tf;

pub use freq::{delay_phase, phase_margin, phase_margin_with_delay, PhaseMargin};
pub use mimo::{singular_values, CMatrix2, TFMatrix2};
pub use ode::{rk4_step, Rk4};
pub use poly::Poly;
pub use ss::{tf_to_ss, StateSpace};
pub use tf::{RationalTF, CANCEL_TOL};
