pub mod error;
pub mod numerics;
pub mod droop;
pub mod plant;
pub mod synthesis;
pub mod lineloop;
pub mod microgrid;
pub mod acceptance;
