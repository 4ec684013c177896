//! Acceptance criteria for the enhancer. Each check returns an [`Outcome`];
//! the `acceptance` test target runs them all and prints one line apiece.

use std::time::{Duration, Instant};

pub mod desk;
pub mod math;
pub mod oracle;
pub mod perf;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} [{:.1} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Result of one criterion before timing: pass flag and a summary.
pub type Check = anyhow::Result<(bool, String)>;

/// Runs `f`, folding errors into a failure and enforcing `budget` if given.
pub fn run(name: &'static str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> Outcome {
    let t = Instant::now();
    let (mut passed, mut detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e:#}")),
    };
    let elapsed = t.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail.push_str(&format!("; over the {} s budget", b.as_secs()));
        }
    }
    Outcome {
        name,
        passed,
        detail,
        elapsed,
    }
}

/// Every criterion in order, or those whose name contains one of
/// `filters`. The two training criteria share one four-style model.
pub fn all(filters: &[String]) -> Vec<Outcome> {
    let wanted =
        |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut out = Vec::new();
    let mut check = |name: &'static str, budget: Option<u64>, f: fn() -> Check| {
        if wanted(name) {
            out.push(run(name, budget.map(Duration::from_secs), f));
        }
    };
    check("interpolation", Some(10), math::interpolation);
    check("enhancer oracle", Some(30), math::enhancer_oracle);
    check("slider homogeneity", None, math::slider_homogeneity);
    check("dual adain algebra", None, math::dual_adain_algebra);
    check("style math", None, math::style_math);
    check("gradient checks", Some(300), math::gradient_checks);
    check("initialization invariant", None, math::init_invariant);
    check("desk two-style learning", Some(15 * 60), desk::two_style);

    const MATRIX: &str = "multi-style matrix";
    const UNSEEN: &str = "unseen-style generalization";
    if wanted(MATRIX) || wanted(UNSEEN) {
        let t = Instant::now();
        let four = desk::FourStyle::train();
        let train_time = t.elapsed();
        match four {
            Ok(model) => {
                if wanted(MATRIX) {
                    let mut m = run(MATRIX, None, || model.matrix());
                    m.elapsed += train_time;
                    if m.elapsed > Duration::from_secs(30 * 60) {
                        m.passed = false;
                        m.detail.push_str("; over the 1800 s budget");
                    }
                    out.push(m);
                }
                if wanted(UNSEEN) {
                    out.push(run(UNSEEN, None, || model.unseen()));
                }
            }
            Err(e) => {
                for name in [MATRIX, UNSEEN].into_iter().filter(|n| wanted(n)) {
                    out.push(Outcome {
                        name,
                        passed: false,
                        detail: format!("training failed: {e:#}"),
                        elapsed: train_time,
                    });
                }
            }
        }
    }

    if wanted("throughput") {
        out.push(run("throughput", None, perf::throughput));
    }
    if wanted("persistence") {
        out.push(run("persistence", None, perf::persistence));
    }
    out
}
