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

#include "lmactd/hashing.h"

#include <array>
#include <cstdio>

#include "lmactd/error.h"

namespace lmactd {

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  LMACTD_CHECK(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1, Error,
               "sha256 init failed");
}

Sha256& Sha256::Update(const void* data, std::size_t size) {
  EVP_DigestUpdate(ctx_.get(), data, size);
  return *this;
}

Sha256& Sha256::Update(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU).contiguous();
  Update(std::string(c.dtype().name()));
  for (auto s : c.sizes()) UpdatePod<int64_t>(s);
  return Update(c.data_ptr(), c.numel() * c.element_size());
}

std::string Sha256::HexDigest() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr);
  return hex;
}

std::string Sha256Hex(std::string_view data) { return Sha256().Update(data).HexDigest(); }

}  // namespace lmactd
