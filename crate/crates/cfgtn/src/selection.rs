//! Stepwise model selection and bootstrap standard errors.
