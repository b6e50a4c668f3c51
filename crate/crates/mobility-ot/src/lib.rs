//! Generalized Wasserstein distances with concave mobility on a bounded
//! interval, computed through the dynamic (continuity-equation) formulation.
//!
//! The distance between two grid measures is the infimum of a convex action
//! over discrete transport curves joining them:
//!
//! ```text
//! W(mu0, mu1)^p = inf { dt * sum phi(rho_hat, w) ghat  :  discrete CE holds }
//! phi(r, w)     = |w|^p / h(r)^(p-1)
//! ```
//!
//! where `h` is a concave mobility on `(a, b)`. The crate provides the
//! mobility/action layer, grid measures, transport curves, a primal-dual
//! solver for the distance and its geodesics, a Neumann heat flow with
//! entropy-dissipation bounds, and independent oracles used to validate all
//! of it.
//!
//! ```
//! use mobility_ot::mobility::{ActionDensity, MobilitySpec};
//!
//! let h = MobilitySpec::quadratic(0.0, 1.0)?;
//! let phi = ActionDensity::new(2.0, h)?;
//! assert_eq!(phi.eval_action(0.5, &[1.0]), 4.0);       // |w|^2 / h(1/2)
//! assert_eq!(phi.eval_action(1.0, &[0.1]), f64::INFINITY); // saturated cell
//! # Ok::<(), mobility_ot::Error>(())
//! ```

pub mod dynamics;
pub mod error;
pub mod measures;
pub mod mobility;
pub mod oracle;

pub use error::{Error, Result};
