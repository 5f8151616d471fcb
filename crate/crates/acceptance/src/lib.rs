//! Holds the `acceptance` integration test target; it runs after the other
//! workspace tests so a failing criterion does not hide their results.
