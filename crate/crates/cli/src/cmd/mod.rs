pub mod degrade;
pub mod metrics;
pub mod restore;
pub mod schedule;
pub mod verify;
