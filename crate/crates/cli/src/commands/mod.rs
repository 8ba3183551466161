pub mod attribute;
pub mod fad;
pub mod gen;
pub mod matching;
pub mod replay;
pub mod train;
