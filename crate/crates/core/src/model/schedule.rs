use std::fmt;

use super::ModelError;

/// Formula or table producing the n-th schedule value.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleForm {
    Constant(f64),
    /// `1 - 1/(n + k)`
    OneMinusInverse { k: f64 },
    /// `1/(n + k)`
    Inverse { k: f64 },
    /// `1/(n + k)^p`
    InversePower { k: f64, p: f64 },
    List(Vec<f64>),
}

/// Behaviour of the series `Σ s_n`, decided from the formula alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesBehavior {
    Divergent,
    Convergent,
    Unknown,
}

impl fmt::Display for SeriesBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesBehavior::Divergent => "divergent",
            SeriesBehavior::Convergent => "convergent",
            SeriesBehavior::Unknown => "unknown",
        })
    }
}

/// An evaluable real sequence clamped into a closed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    form: ScheduleForm,
    lo: f64,
    hi: f64,
}

impl Schedule {
    /// Constant and list values must already lie in `[lo, hi]`; formula
    /// schedules are clamped at evaluation time instead.
    pub fn new(form: ScheduleForm, lo: f64, hi: f64) -> Result<Self, ModelError> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(ModelError::InvalidClamp { lo, hi });
        }
        let in_range = |v: f64| v.is_finite() && v >= lo && v <= hi;
        match &form {
            ScheduleForm::Constant(c) if !in_range(*c) => {
                return Err(ModelError::ScheduleOutOfRange { value: *c, lo, hi });
            }
            ScheduleForm::List(vals) => {
                if vals.is_empty() {
                    return Err(ModelError::EmptySchedule);
                }
                if let Some(&v) = vals.iter().find(|&&v| !in_range(v)) {
                    return Err(ModelError::ScheduleOutOfRange { value: v, lo, hi });
                }
            }
            ScheduleForm::OneMinusInverse { k } | ScheduleForm::Inverse { k } if !(*k > 0.0 && k.is_finite()) => {
                return Err(ModelError::InvalidScheduleParameter(format!("k must be positive, got {k}")));
            }
            ScheduleForm::InversePower { k, p } => {
                if !(*k > 0.0 && k.is_finite()) {
                    return Err(ModelError::InvalidScheduleParameter(format!("k must be positive, got {k}")));
                }
                if !(*p > 0.0 && p.is_finite()) {
                    return Err(ModelError::InvalidScheduleParameter(format!("p must be positive, got {p}")));
                }
            }
            _ => {}
        }
        Ok(Schedule { form, lo, hi })
    }

    /// Schedule with values in `[0, 1]`.
    pub fn unit(form: ScheduleForm) -> Result<Self, ModelError> {
        Self::new(form, 0.0, 1.0)
    }

    /// Schedule with values in `[0, ∞)`.
    pub fn nonnegative(form: ScheduleForm) -> Result<Self, ModelError> {
        Self::new(form, 0.0, f64::INFINITY)
    }

    pub fn constant(c: f64) -> Result<Self, ModelError> {
        Self::unit(ScheduleForm::Constant(c))
    }

    pub fn form(&self) -> &ScheduleForm {
        &self.form
    }

    pub fn clamp_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of values available, `None` for formula schedules.
    pub fn len(&self) -> Option<usize> {
        match &self.form {
            ScheduleForm::List(v) => Some(v.len()),
            _ => None,
        }
    }

    pub fn eval(&self, n: usize) -> Result<f64, ModelError> {
        let nf = n as f64;
        let raw = match &self.form {
            ScheduleForm::Constant(c) => *c,
            ScheduleForm::OneMinusInverse { k } => 1.0 - 1.0 / (nf + k),
            ScheduleForm::Inverse { k } => 1.0 / (nf + k),
            ScheduleForm::InversePower { k, p } => (nf + k).powf(-p),
            ScheduleForm::List(vals) => *vals
                .get(n)
                .ok_or(ModelError::IndexOutOfRange { index: n, len: vals.len() })?,
        };
        let clamped = raw.clamp(self.lo, self.hi);
        if clamped != raw {
            log::debug!("schedule value {raw} at n={n} clamped to {clamped}");
        }
        Ok(clamped)
    }

    /// Values for `n = 0..len`.
    pub fn values(&self, len: usize) -> Result<Vec<f64>, ModelError> {
        (0..len).map(|n| self.eval(n)).collect()
    }

    /// Whether `Σ_n s_n` diverges, for the built-in families.
    pub fn series_behavior(&self) -> SeriesBehavior {
        match &self.form {
            ScheduleForm::Constant(c) if *c == 0.0 => SeriesBehavior::Convergent,
            ScheduleForm::Constant(_) => SeriesBehavior::Divergent,
            ScheduleForm::OneMinusInverse { .. } | ScheduleForm::Inverse { .. } => SeriesBehavior::Divergent,
            ScheduleForm::InversePower { p, .. } if *p > 1.0 => SeriesBehavior::Convergent,
            ScheduleForm::InversePower { .. } => SeriesBehavior::Divergent,
            ScheduleForm::List(_) => SeriesBehavior::Unknown,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            ScheduleForm::Constant(c) => write!(f, "constant({c})"),
            ScheduleForm::OneMinusInverse { k } => write!(f, "1 - 1/(n+{k})"),
            ScheduleForm::Inverse { k } => write!(f, "1/(n+{k})"),
            ScheduleForm::InversePower { k, p } => write!(f, "1/(n+{k})^{p}"),
            ScheduleForm::List(v) => write!(f, "list[{}]", v.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_evaluation() {
        assert_eq!(Schedule::constant(0.5).unwrap().eval(7).unwrap(), 0.5);
        let s = Schedule::unit(ScheduleForm::OneMinusInverse { k: 2.0 }).unwrap();
        assert_eq!(s.eval(0).unwrap(), 0.5);
        let s = Schedule::unit(ScheduleForm::Inverse { k: 2.0 }).unwrap();
        assert_eq!(s.eval(0).unwrap(), 0.5);
        let s = Schedule::unit(ScheduleForm::InversePower { k: 2.0, p: 2.0 }).unwrap();
        assert_eq!(s.eval(1).unwrap(), 1.0 / 9.0);
    }

    #[test]
    fn formulas_are_clamped() {
        // 1/(n + 0.5) exceeds one at n = 0
        let s = Schedule::unit(ScheduleForm::Inverse { k: 0.5 }).unwrap();
        assert_eq!(s.eval(0).unwrap(), 1.0);
        let s = Schedule::unit(ScheduleForm::OneMinusInverse { k: 0.5 }).unwrap();
        assert_eq!(s.eval(0).unwrap(), 0.0);
    }

    #[test]
    fn constants_outside_range_rejected() {
        assert!(matches!(Schedule::constant(1.5), Err(ModelError::ScheduleOutOfRange { .. })));
        assert!(Schedule::unit(ScheduleForm::List(vec![0.2, -0.1])).is_err());
        assert!(Schedule::nonnegative(ScheduleForm::Constant(3.0)).is_ok());
    }

    #[test]
    fn exhausted_list() {
        let s = Schedule::unit(ScheduleForm::List(vec![0.1, 0.2])).unwrap();
        assert_eq!(s.eval(1).unwrap(), 0.2);
        assert!(matches!(s.eval(2), Err(ModelError::IndexOutOfRange { index: 2, len: 2 })));
    }

    #[test]
    fn series_classification() {
        let f = |form| Schedule::unit(form).unwrap().series_behavior();
        assert_eq!(f(ScheduleForm::Constant(0.3)), SeriesBehavior::Divergent);
        assert_eq!(f(ScheduleForm::Inverse { k: 2.0 }), SeriesBehavior::Divergent);
        assert_eq!(f(ScheduleForm::InversePower { k: 2.0, p: 2.0 }), SeriesBehavior::Convergent);
        assert_eq!(f(ScheduleForm::InversePower { k: 2.0, p: 0.5 }), SeriesBehavior::Divergent);
        assert_eq!(f(ScheduleForm::List(vec![0.5])), SeriesBehavior::Unknown);
    }

    #[test]
    fn bad_parameters() {
        assert!(Schedule::unit(ScheduleForm::Inverse { k: 0.0 }).is_err());
        assert!(Schedule::unit(ScheduleForm::InversePower { k: 1.0, p: -1.0 }).is_err());
        assert!(Schedule::new(ScheduleForm::Constant(0.0), 1.0, 0.0).is_err());
    }
}
