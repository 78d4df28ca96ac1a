pub mod error;
pub mod gauss;
pub mod learners;
pub mod linalg;
pub mod oracles;
pub mod pipeline;
pub mod points;
pub mod poly;
pub mod seed;
pub mod testers;
