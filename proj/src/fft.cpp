#include "mmpoint/fft.hpp"

#include <map>
#include <mutex>
#include <tuple>

#include <fftw3.h>

namespace mmpoint {

namespace {

using PlanKey = std::tuple<int, int, int, int, int>;

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(const PlanKey& key) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const auto [n, howmany, stride, dist, sign] = key;
    const std::size_t extent = static_cast<std::size_t>((howmany - 1) * dist + (n - 1) * stride + 1);
    auto* scratch = fftw_alloc_complex(extent);
    int dims[1] = {n};
    fftw_plan plan = fftw_plan_many_dft(1, dims, howmany, scratch, nullptr, stride, dist, scratch, nullptr,
                                        stride, dist, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    if (plan == nullptr) throw DomainError("fft: FFTW could not plan transform");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<PlanKey, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void fft_many(std::span<cplx> data, int n, int howmany, int stride, int dist, FftSign sign) {
  if (n <= 0 || howmany <= 0) return;
  const std::size_t needed = static_cast<std::size_t>((howmany - 1) * dist + (n - 1) * stride + 1);
  if (data.size() < needed) throw DomainError("fft: buffer smaller than transform extent");
  fftw_plan plan = cache().get({n, howmany, stride, dist, sign == FftSign::negative ? FFTW_FORWARD : FFTW_BACKWARD});
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace mmpoint
