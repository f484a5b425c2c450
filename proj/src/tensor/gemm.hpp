#pragma once

#include <cstddef>

namespace fer::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C, op(A) is M x K and op(B) is
// K x N.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, T alpha, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T beta, T* c, std::size_t ldc);

}  // namespace fer::detail
