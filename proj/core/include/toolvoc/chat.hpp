// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace toolvoc {

using TokenId = uint32_t;
using TokenSeq = std::vector<TokenId>;

enum class Role { kSystem, kUser, kAssistant };

inline const char* role_name(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;
};

using Conversation = std::vector<ChatMessage>;

}  // namespace toolvoc
