pub mod analysis;
pub mod cluster;
pub mod dataset;
pub mod post;
pub mod serve;
pub mod tcm;
pub mod train;
