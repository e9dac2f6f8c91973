//! Coherent-state probes of microlocal regularity and checks of how
//! propagators move singularities.

mod probe;
mod shift;
mod smoothing;

pub use probe::{
    geometric_ladder, probe_decay, write_samples_csv, CoherentProbe, Verdict, VerdictThresholds,
    WFSample,
};
pub use shift::{
    locate_concentration, shift_map_apply, verify_shift_law, Concentration, ProbeSearch, ShiftMap,
    ShiftReport,
};
pub use smoothing::{
    singular_control, verify_smoothing, RatioEntry, SingularControl, SmoothingReport,
    SmoothingSettings,
};
