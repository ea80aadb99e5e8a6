#include "workbench/bus.hpp"

#include <algorithm>
#include <exception>

namespace workbench::bus {

Subscription MessageBus::subscribe(const std::string& topic, Callback callback) {
  if (topic.empty()) {
    throw std::invalid_argument("subscribe: topic must be non-empty");
  }
  if (!callback) {
    throw std::invalid_argument("subscribe: callback must be callable");
  }
  SubscriptionHandle handle{next_handle_++};
  topics_[topic].push_back(Entry{handle, std::make_shared<Callback>(std::move(callback))});
  handles_.emplace(handle, topic);
  return Subscription{handle, topic};
}

void MessageBus::unsubscribe(SubscriptionHandle handle) {
  auto it = handles_.find(handle);
  if (it == handles_.end()) {
    throw NotFoundError("unsubscribe: unknown subscription handle " + std::to_string(handle.value));
  }
  auto topic_it = topics_.find(it->second);
  auto& entries = topic_it->second;
  std::erase_if(entries, [&](const Entry& e) { return e.handle == handle; });
  if (entries.empty()) {
    topics_.erase(topic_it);
  }
  handles_.erase(it);
}

PublishReport MessageBus::publish(const std::string& topic, Payload payload) {
  if (topic.empty()) {
    throw std::invalid_argument("publish: topic must be non-empty");
  }
  Pending pending;
  pending.message = Message{topic, std::move(payload), next_seq_++};
  if (auto it = topics_.find(topic); it != topics_.end()) {
    pending.recipients = it->second;
  }

  PublishReport report;
  report.seq = pending.message.seq;

  if (dispatching_) {
    report.deferred = true;
    queue_.push_back(std::move(pending));
    return report;
  }

  dispatching_ = true;
  report.delivered = dispatch(pending, report.failures);
  while (!queue_.empty()) {
    Pending next = std::move(queue_.front());
    queue_.pop_front();
    std::vector<DeliveryFailure> ignored;
    dispatch(next, ignored);
  }
  dispatching_ = false;
  return report;
}

std::size_t MessageBus::dispatch(const Pending& pending, std::vector<DeliveryFailure>& failures) {
  std::size_t delivered = 0;
  for (const auto& entry : pending.recipients) {
    if (!is_active(entry.handle)) {
      continue;
    }
    ++delivered;
    try {
      (*entry.callback)(pending.message);
    } catch (const std::exception& e) {
      DeliveryFailure f{entry.handle, pending.message.topic, pending.message.seq, e.what()};
      failures.push_back(f);
      diagnostics_.push_back(std::move(f));
    } catch (...) {
      DeliveryFailure f{entry.handle, pending.message.topic, pending.message.seq, "unknown exception"};
      failures.push_back(f);
      diagnostics_.push_back(std::move(f));
    }
  }
  return delivered;
}

bool MessageBus::is_active(SubscriptionHandle handle) const {
  return handles_.contains(handle);
}

std::size_t MessageBus::subscriber_count(const std::string& topic) const {
  auto it = topics_.find(topic);
  return it == topics_.end() ? 0 : it->second.size();
}

}  // namespace workbench::bus
