use std::fmt::Write as _;

/// Which objective an iteration minimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Reconstruction,
    Angle,
}

/// Values observed at the forward pass of one iteration, before its update.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// 1-based iteration index within the phase.
    pub step: usize,
    pub kind: StepKind,
    /// Value of the objective this step minimized.
    pub objective: f64,
    pub loss_recon: f64,
    pub loss_entropy: f64,
    /// Only present on angle steps.
    pub loss_angle: Option<f64>,
    pub rowsum_mean: f64,
    pub rowsum_max_dev: f64,
    pub min_entry: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub const CSV_HEADER: &'static str = "step,loss_recon,loss_entropy,loss_angle,rowsum_mean";

    pub fn push(&mut self, r: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|p| p.step < r.step));
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn angle_steps(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.kind == StepKind::Angle)
    }

    /// CSV of every record whose step is a multiple of `every`, plus the
    /// first record, every angle step, and the last record. `loss_angle` is
    /// empty on reconstruction steps.
    pub fn to_csv(&self, every: usize) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let last = self.records.len().saturating_sub(1);
        for (i, r) in self.records.iter().enumerate() {
            let keep = i == 0 || i == last || r.step % every == 0 || r.kind == StepKind::Angle;
            if !keep {
                continue;
            }
            let angle = r.loss_angle.map(|a| format!("{a:.12e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{},{:.15}",
                r.step, r.loss_recon, r.loss_entropy, angle, r.rowsum_mean
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, kind: StepKind) -> TraceRecord {
        TraceRecord {
            step,
            kind,
            objective: 1.0,
            loss_recon: 1.0,
            loss_entropy: 0.5,
            loss_angle: (kind == StepKind::Angle).then_some(0.1),
            rowsum_mean: 1.0,
            rowsum_max_dev: 0.0,
            min_entry: 0.0,
        }
    }

    #[test]
    fn csv_keeps_logged_and_angle_rows() {
        let mut t = TrainTrace::default();
        for s in 1..=25 {
            let kind = if s % 10 == 0 { StepKind::Angle } else { StepKind::Reconstruction };
            t.push(rec(s, kind));
        }
        let csv = t.to_csv(4);
        let steps: Vec<usize> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(steps, [1, 4, 8, 10, 12, 16, 20, 24, 25]);
        assert!(csv.starts_with(TrainTrace::CSV_HEADER));
        let row10 = csv.lines().find(|l| l.starts_with("10,")).unwrap();
        assert_eq!(row10.split(',').nth(3).unwrap(), "1.000000000000e-1");
        let row4 = csv.lines().find(|l| l.starts_with("4,")).unwrap();
        assert_eq!(row4.split(',').nth(3).unwrap(), "");
    }
}
