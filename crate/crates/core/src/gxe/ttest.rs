use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_var, t_two_sided_p};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub kind: TTestKind,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-sided two-sample t-test of mean(a) - mean(b).
pub fn two_sample_ttest(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTest> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 values per group, got {na} and {nb}"
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in t-test".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_var(a), sample_var(b));
    let (fa, fb) = (na as f64, nb as f64);
    let (se2, df) = match kind {
        TTestKind::Welch => {
            let (sa, sb) = (va / fa, vb / fb);
            let se2 = sa + sb;
            let df = if se2 > 0.0 {
                se2 * se2 / (sa * sa / (fa - 1.0) + sb * sb / (fb - 1.0))
            } else {
                fa + fb - 2.0
            };
            (se2, df)
        }
        TTestKind::Pooled => {
            let df = fa + fb - 2.0;
            let sp = ((fa - 1.0) * va + (fb - 1.0) * vb) / df;
            (sp * (1.0 / fa + 1.0 / fb), df)
        }
    };
    let (t, p) = if se2 > 0.0 {
        let t = (ma - mb) / se2.sqrt();
        (t, t_two_sided_p(t, df)?)
    } else if ma == mb {
        (0.0, 1.0)
    } else {
        return Err(Error::Degenerate(
            "both groups have zero variance but different means".into(),
        ));
    };
    Ok(TTest {
        kind,
        n_a: na,
        n_b: nb,
        mean_a: ma,
        mean_b: mb,
        t,
        df,
        p,
    })
}
