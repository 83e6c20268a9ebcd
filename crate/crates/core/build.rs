fn main() {
    // Eigendecomposition is delegated to the system LAPACK. `liblapacke`
    // provides the LAPACKE_* C wrappers; `libopenblas` provides the
    // underlying BLAS/LAPACK kernels and `openblas_set_num_threads`.
    println!("cargo:rustc-link-lib=dylib=lapacke");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
