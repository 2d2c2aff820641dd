pub mod interp;
pub mod ir;
pub mod sema;
pub mod smt;
pub mod surface;
pub mod translator;
pub mod vcgen;
