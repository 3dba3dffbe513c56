//! Exact Monte Carlo hypothesis tests for Gaussian graphical models.
//!
//! Given a graph `G`, the library samples datasets that are *exchangeable*
//! with the observed data under the model `M_G` (multivariate normal with
//! precision matrix supported on `G`), by conditioning on the sufficient
//! statistic. Two test families build on those copies:
//!
//! - **MC-GoF** ([`gof_test::run_gof`]): is the data consistent with `M_G`?
//!   Statistics range from aggregated partial-correlation z-scores to
//!   penalized likelihood ratios ([`gof_stats`]).
//! - **G-CRT** ([`crt::run_crt`]): is a response conditionally independent of
//!   a covariate block given the rest, assuming only that the covariates lie
//!   in some `M_G`?
//!
//! Both produce finite-sample-valid p-values with no asymptotics and no
//! nuisance-parameter estimation. [`baselines`] implements deterministic
//! competitors, and [`bench`] replays the full simulation scenarios.
//!
//! ```
//! use ggmtest::{band_graph_precision, mvn_sample, stream_rng};
//! use ggmtest::{GofStatKind, GofStatistic, GofTestSpec, SamplerConfig};
//!
//! // simulate from a band GGM and test the true graph: p-value is not small
//! let (graph, omega) = band_graph_precision(10, 2, 0.15)?;
//! let x = mvn_sample(50, &[0.0; 10], &omega, &mut stream_rng(7, 0))?;
//! let spec = GofTestSpec::new(
//!     graph,
//!     GofStatistic::new(GofStatKind::FSum),
//!     SamplerConfig::new(42).with_copies(99),
//! );
//! let result = ggmtest::run_gof(&x, &spec)?;
//! assert!(result.pvalue > 0.01);
//! # Ok::<(), ggmtest::Error>(())
//! ```

pub mod baselines;
pub mod bench;
pub mod crt;
pub mod data;
pub mod error;
pub mod ggm;
pub mod glasso;
pub mod gof_stats;
pub mod gof_test;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod pvalue;
pub mod regress;
pub mod rng;
pub mod sampler;
pub mod special;

pub mod guide;

pub use baselines::{bonf_gof, m1p1_gof, BaselineResult};
pub use crt::{
    bonferroni_combine, f_test_baseline, run_crt, run_crt_per_variable, CrtProblem,
    CrtStatistic, PerVariableCrt,
};
pub use data::{DataMatrix, SquareMatrix};
pub use error::{Error, Result};
pub use ggm::{mvn_sample, standardize_to_unit_variances, sufficient_statistic};
pub use gof_stats::{GofStatKind, GofStatistic};
pub use gof_test::{run_gof, run_local_gof, GofTestSpec, TestResult};
pub use graph::{
    band_graph_precision, erdos_renyi_precision, hub_graph_precision, Graph, PrecisionMatrix,
};
pub use pvalue::PvalueMode;
pub use rng::stream_rng;
pub use sampler::{degree_ascending_order, exchangeable_copies, SamplerConfig};
