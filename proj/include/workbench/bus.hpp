#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace workbench::bus {

using Payload = nlohmann::json;

struct Message {
  std::string topic;
  Payload payload;
  std::uint64_t seq = 0;
};

using Callback = std::function<void(const Message&)>;

struct SubscriptionHandle {
  std::uint64_t value = 0;
  friend auto operator<=>(const SubscriptionHandle&, const SubscriptionHandle&) = default;
};

struct Subscription {
  SubscriptionHandle handle;
  std::string topic;
};

// A subscriber callback that threw while a message was being dispatched.
struct DeliveryFailure {
  SubscriptionHandle handle;
  std::string topic;
  std::uint64_t seq = 0;
  std::string what;
};

struct PublishReport {
  std::uint64_t seq = 0;
  // Callbacks invoked for this message. Zero when the message was deferred.
  std::size_t delivered = 0;
  // True when publish was called from inside a callback; the message is then
  // dispatched after the current dispatch finishes.
  bool deferred = false;
  std::vector<DeliveryFailure> failures;
};

class NotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Synchronous, single-threaded publish/subscribe bus.
///
/// Subscribers of a topic are invoked in registration order. A subscriber
/// receives a message iff it was subscribed when the message was published
/// and is still subscribed when dispatch reaches it. Publishing from inside
/// a callback queues the message behind the one being dispatched, so
/// dispatch never recurses and every subscriber observes increasing seq.
class MessageBus {
 public:
  MessageBus() = default;
  MessageBus(const MessageBus&) = delete;
  MessageBus& operator=(const MessageBus&) = delete;

  Subscription subscribe(const std::string& topic, Callback callback);
  void unsubscribe(SubscriptionHandle handle);
  PublishReport publish(const std::string& topic, Payload payload);

  std::size_t subscriber_count(const std::string& topic) const;
  std::uint64_t last_seq() const { return next_seq_ - 1; }

  // Every callback failure seen by this bus, including deferred messages.
  const std::vector<DeliveryFailure>& diagnostics() const { return diagnostics_; }

 private:
  struct Entry {
    SubscriptionHandle handle;
    std::shared_ptr<Callback> callback;
  };
  struct Pending {
    Message message;
    std::vector<Entry> recipients;
  };

  std::size_t dispatch(const Pending& pending, std::vector<DeliveryFailure>& failures);
  bool is_active(SubscriptionHandle handle) const;

  std::map<std::string, std::vector<Entry>> topics_;
  std::map<SubscriptionHandle, std::string> handles_;
  std::deque<Pending> queue_;
  std::vector<DeliveryFailure> diagnostics_;
  std::uint64_t next_handle_ = 1;
  std::uint64_t next_seq_ = 1;
  bool dispatching_ = false;
};

}  // namespace workbench::bus
