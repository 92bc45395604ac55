//! Static analysis and source-to-source refactoring of imperative
//! TensorFlow 2 Python code towards `tf.function` graph execution.

pub mod callgraph;
pub mod driver;
pub mod effects;
pub mod frontend;
pub mod hybrid;
pub mod names;
pub mod refactor;
pub mod rewrite;
pub mod types;
