//! Exact coefficient systems over simplicial bases, their lift to flat mixed
//! superconnections of polynomial forms, partition-of-unity smoothing, and a
//! simulator for the simplex vector fields W_k.

pub mod fiber;
pub mod flat;
pub mod formmat;
pub mod cli;
pub mod gen;
pub mod instance;
pub mod forms;
pub mod linalg;
pub mod mixed;
pub mod morse;
pub mod rational;
pub mod report;
pub mod simplex;
pub mod smoothing;
pub mod wk;
