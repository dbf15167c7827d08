pub mod cli;
pub mod error;
pub mod family;
pub mod rational;
pub mod skeleton;
pub mod synthesis;
pub mod padic;
pub mod verify;
