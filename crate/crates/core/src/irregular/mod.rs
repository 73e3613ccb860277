//! The orbit-gluing construction: schedules, heavy separated level sets,
//! glued families, the fractal of points with divergent Birkhoff averages,
//! exact ball masses of the level measures, and the certified pressure
//! lower bound.

mod fractal;
mod level;
mod mass;
mod schedule;

pub use fractal::{glue_point, verify_divergence, FractalCoding, OscillationReport, OscillationRow};
pub use level::{extract_all_levels, extract_level, two_measure_level, LevelData, PreparedLevels};
pub use mass::{ball_log_mass, ball_mass};
pub use schedule::{build_schedule, GluingSchedule, RatioThresholds, ScheduleParams};

mod certify;
pub use certify::{certified_lower_bound, Certificate, CountingCheck, SamplePlan};
