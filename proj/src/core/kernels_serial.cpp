#include "artmetric/core/kernels.hpp"

namespace artmetric::kernels {

// The i-k-j loop order keeps the inner loop stride-1 over both B and C so
// the compiler can vectorize it without reordering a reduction.
void gemm_nn_serial(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  for (int i = 0; i < M; ++i) {
    float* c = C + static_cast<size_t>(i) * N;
    if (!acc)
      for (int j = 0; j < N; ++j) c[j] = 0.0f;
    const float* a = A + static_cast<size_t>(i) * K;
    for (int k = 0; k < K; ++k) {
      const float av = a[k];
      const float* b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

void gemm_nt_serial(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<size_t>(i) * K;
    for (int j = 0; j < N; ++j) {
      const float* b = B + static_cast<size_t>(j) * K;
      // four independent partial sums so the dot product pipelines
      float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
      int k = 0;
      for (; k + 4 <= K; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
      }
      for (; k < K; ++k) s0 += a[k] * b[k];
      const float s = (s0 + s1) + (s2 + s3);
      float* c = C + static_cast<size_t>(i) * N + j;
      *c = acc ? *c + s : s;
    }
  }
}

void gemm_tn_serial(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  for (int i = 0; i < M; ++i) {
    float* c = C + static_cast<size_t>(i) * N;
    if (!acc)
      for (int j = 0; j < N; ++j) c[j] = 0.0f;
    for (int k = 0; k < K; ++k) {
      const float av = A[static_cast<size_t>(k) * M + i];
      const float* b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

void im2col_serial(const float* img, int C, int H, int W, int kh, int kw, int stride, int pad,
                   float* col) {
  const int oh = conv_out(H, kh, stride, pad);
  const int ow = conv_out(W, kw, stride, pad);
  const int rows = C * kh * kw;
  for (int r = 0; r < rows; ++r) {
    const int c = r / (kh * kw);
    const int ky = (r / kw) % kh;
    const int kx = r % kw;
    float* out = col + static_cast<size_t>(r) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const int iy = y * stride + ky - pad;
      for (int x = 0; x < ow; ++x) {
        const int ix = x * stride + kx - pad;
        out[y * ow + x] = (iy >= 0 && iy < H && ix >= 0 && ix < W)
                              ? img[(static_cast<size_t>(c) * H + iy) * W + ix]
                              : 0.0f;
      }
    }
  }
}

void col2im_serial(const float* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                   float* img) {
  const int oh = conv_out(H, kh, stride, pad);
  const int ow = conv_out(W, kw, stride, pad);
  // Loop over image channels so each output element is owned by one
  // iteration; the parallel variant splits this same loop.
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const int r = (c * kh + ky) * kw + kx;
        const float* in = col + static_cast<size_t>(r) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * stride + kx - pad;
            if (ix < 0 || ix >= W) continue;
            img[(static_cast<size_t>(c) * H + iy) * W + ix] += in[y * ow + x];
          }
        }
      }
    }
  }
}

}  // namespace artmetric::kernels
