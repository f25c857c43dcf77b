#pragma once

#include <cstddef>

namespace artmetric::kernels {

// Hot numeric kernels come in two variants: a serial reference and an
// OpenMP-parallel one. The parallel variants split work so every output
// element is produced by the same serial inner loop as the reference,
// which makes the two bitwise identical for any thread count.
enum class Backend { serial, parallel };

Backend& active_backend();
void set_threads(int n);
int max_threads();

// Row-major GEMM. C (MxN) = A*B, optionally accumulating into C.
// nn: A is MxK, B is KxN.  nt: A is MxK, B is NxK.  tn: A is KxM, B is KxN.
void gemm_nn_serial(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_nt_serial(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_tn_serial(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_nn_parallel(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_nt_parallel(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_tn_parallel(int M, int N, int K, const float* A, const float* B, float* C, bool acc);

// Patch unfolding for convolution. col is (C*kh*kw) x (OH*OW).
void im2col_serial(const float* img, int C, int H, int W, int kh, int kw, int stride, int pad,
                   float* col);
void im2col_parallel(const float* img, int C, int H, int W, int kh, int kw, int stride, int pad,
                     float* col);
// Adjoint of im2col; accumulates into img (caller zeroes it).
void col2im_serial(const float* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                   float* img);
void col2im_parallel(const float* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                     float* img);

// Dispatch on active_backend().
void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C, bool acc = false);
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C, bool acc = false);
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C, bool acc = false);
void im2col(const float* img, int C, int H, int W, int kh, int kw, int stride, int pad, float* col);
void col2im(const float* col, int C, int H, int W, int kh, int kw, int stride, int pad, float* img);

inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

}  // namespace artmetric::kernels
