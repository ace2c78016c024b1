// Copyright 2026 The lmactd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LMACTD_HASHING_H_
#define LMACTD_HASHING_H_

#include <openssl/evp.h>

#include <memory>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace lmactd {

// Incremental SHA-256 producing lowercase hex digests.
class Sha256 {
 public:
  Sha256();
  Sha256& Update(const void* data, std::size_t size);
  Sha256& Update(std::string_view s) { return Update(s.data(), s.size()); }
  // Hashes dtype, shape and the raw contiguous CPU bytes.
  Sha256& Update(const torch::Tensor& t);
  template <typename T>
  Sha256& UpdatePod(const T& v) { return Update(&v, sizeof(T)); }
  std::string HexDigest();

 private:
  struct CtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
  };
  std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx_;
};

std::string Sha256Hex(std::string_view data);

}  // namespace lmactd

#endif  // LMACTD_HASHING_H_
