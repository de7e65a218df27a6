#include "exprag/error.hpp"
#include "exprag/policy.hpp"

namespace exprag {

RemoteChatPolicy::RemoteChatPolicy(EndpointConfig endpoint, std::size_t max_action_chars)
    : client_(std::move(endpoint)), max_chars_(max_action_chars) {}

std::unique_ptr<RemoteChatPolicy> RemoteChatPolicy::from_env(std::size_t max_action_chars) {
  return std::make_unique<RemoteChatPolicy>(EndpointConfig::from_env("EXPRAG_LLM"), max_action_chars);
}

nlohmann::json RemoteChatPolicy::request_body(const std::vector<ChatMessage>& context) const {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : context) {
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  return {{"model", client_.config().model}, {"messages", std::move(messages)}, {"temperature", 0}};
}

std::string RemoteChatPolicy::decide_action(const std::vector<ChatMessage>& context) const {
  if (context.empty() || context.back().role != Role::user) {
    throw ValidationError("policy context must end with a user message");
  }
  nlohmann::json reply;
  try {
    reply = client_.post("/v1/chat/completions", request_body(context));
  } catch (const TransportError& e) {
    throw PolicyUnavailable(e.what());
  } catch (const HttpStatusError& e) {
    throw PolicyUnavailable(e.what());
  } catch (const ParseError& e) {
    throw PolicyError(e.what());
  }
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return std::string(kInvalidActionSentinel);
    return normalize_action(content.get<std::string>(), max_chars_);
  } catch (const nlohmann::json::exception& e) {
    throw PolicyError(std::string("unreadable chat completion: ") + e.what());
  }
}

}  // namespace exprag
