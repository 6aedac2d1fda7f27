#include "ezbft/codec.hpp"

#include <stdexcept>

namespace ezbft {

namespace {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 7; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void bytes(ByteView b) {
    u32(static_cast<std::uint32_t>(b.size()));
    out_.insert(out_.end(), b.begin(), b.end());
  }
  void str(std::string_view s) { bytes(as_bytes(s)); }
  void digest(const Digest& d) { out_.insert(out_.end(), d.bytes.begin(), d.bytes.end()); }
  void tag(Tag t) { u8(static_cast<std::uint8_t>(t)); }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  Bytes bytes() {
    std::uint32_t n = u32();
    need(n);
    Bytes b(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return b;
  }
  std::string str() {
    auto b = bytes();
    return {b.begin(), b.end()};
  }
  Digest digest() {
    need(32);
    Digest d;
    std::copy(in_.begin() + pos_, in_.begin() + pos_ + 32, d.bytes.begin());
    pos_ += 32;
    return d;
  }
  bool flag() {
    auto v = u8();
    if (v > 1) throw DecodeError("bad flag");
    return v == 1;
  }
  void expect(Tag t) {
    if (u8() != static_cast<std::uint8_t>(t)) throw DecodeError("unexpected tag");
  }
  std::uint32_t count() {
    auto n = u32();
    // Every element is at least one byte; guards against absurd reservations.
    if (n > in_.size() - pos_) throw DecodeError("bad count");
    return n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("truncated");
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

// --- primitives -------------------------------------------------------------

void put(Writer& w, NodeId id) {
  w.u8(static_cast<std::uint8_t>(id.kind));
  w.u32(id.index);
}
void get(Reader& r, NodeId& id) {
  auto kind = r.u8();
  if (kind > 1) throw DecodeError("bad node kind");
  id.kind = static_cast<NodeKind>(kind);
  id.index = r.u32();
}

void put(Writer& w, const InstanceId& i) {
  w.u32(i.space);
  w.u64(i.slot);
}
void get(Reader& r, InstanceId& i) {
  i.space = r.u32();
  i.slot = r.u64();
}

void put(Writer& w, const DepSet& deps) {
  w.u32(static_cast<std::uint32_t>(deps.size()));
  for (const auto& d : deps) put(w, d);
}
void get(Reader& r, DepSet& deps) {
  deps.clear();
  auto n = r.count();
  std::optional<InstanceId> last;
  for (std::uint32_t k = 0; k < n; ++k) {
    InstanceId i;
    get(r, i);
    if (last && !(*last < i)) throw DecodeError("unsorted dependency set");
    last = i;
    deps.insert(deps.end(), i);
  }
}

void put(Writer& w, const Command& c) {
  w.u8(static_cast<std::uint8_t>(c.op));
  w.str(c.key);
  w.i64(c.value);
}
void get(Reader& r, Command& c) {
  auto op = r.u8();
  if (op > 2) throw DecodeError("bad op");
  c.op = static_cast<OpKind>(op);
  c.key = r.str();
  c.value = r.i64();
}

void put(Writer& w, const Reply& rep) {
  w.u8(rep ? 1 : 0);
  w.i64(rep.value_or(0));
}
void get(Reader& r, Reply& rep) {
  bool present = r.flag();
  auto v = r.i64();
  if (present)
    rep = v;
  else if (v != 0)
    throw DecodeError("non-canonical empty reply");
  else
    rep.reset();
}

void put(Writer& w, const Signature& s) { w.bytes(s.bytes); }
void get(Reader& r, Signature& s) { s.bytes = r.bytes(); }

// --- messages -------------------------------------------------------------

void put(Writer& w, const RequestMsg& m, bool with_hint, bool with_sig) {
  w.tag(Tag::request);
  put(w, m.command);
  w.u64(m.t);
  put(w, m.client);
  if (with_hint && m.original) {
    w.u8(1);
    w.u32(*m.original);
  } else {
    w.u8(0);
  }
  if (with_sig)
    put(w, m.sig);
  else
    w.bytes({});
}
void put(Writer& w, const RequestMsg& m) { put(w, m, true, true); }
void get(Reader& r, RequestMsg& m) {
  r.expect(Tag::request);
  get(r, m.command);
  m.t = r.u64();
  get(r, m.client);
  if (r.flag())
    m.original = r.u32();
  else
    m.original.reset();
  get(r, m.sig);
}

void put(Writer& w, const SpecOrderCore& m, bool with_sig) {
  w.tag(Tag::spec_order);
  w.u64(m.owner.value);
  put(w, m.instance);
  put(w, m.deps);
  w.u64(m.seq.value);
  w.digest(m.space_digest);
  w.digest(m.request_digest);
  if (with_sig)
    put(w, m.sig);
  else
    w.bytes({});
}
void put(Writer& w, const SpecOrderCore& m) { put(w, m, true); }
void get(Reader& r, SpecOrderCore& m) {
  r.expect(Tag::spec_order);
  m.owner.value = r.u64();
  get(r, m.instance);
  get(r, m.deps);
  m.seq.value = r.u64();
  m.space_digest = r.digest();
  m.request_digest = r.digest();
  get(r, m.sig);
}

void put(Writer& w, const SpecOrderMsg& m) {
  put(w, m.order);
  put(w, m.request);
}
void get(Reader& r, SpecOrderMsg& m) {
  get(r, m.order);
  get(r, m.request);
}

void put_reply_core(Writer& w, const SpecReplyMsg& m) {
  w.tag(Tag::spec_reply);
  w.u64(m.owner.value);
  put(w, m.instance);
  put(w, m.deps);
  w.u64(m.seq.value);
  w.digest(m.request_digest);
  put(w, m.client);
  w.u64(m.t);
}
void put(Writer& w, const SpecReplyMsg& m) {
  put_reply_core(w, m);
  put(w, m.sig);
  w.u32(m.sender);
  put(w, m.rep);
  put(w, m.order);
}
void get(Reader& r, SpecReplyMsg& m) {
  r.expect(Tag::spec_reply);
  m.owner.value = r.u64();
  get(r, m.instance);
  get(r, m.deps);
  m.seq.value = r.u64();
  m.request_digest = r.digest();
  get(r, m.client);
  m.t = r.u64();
  get(r, m.sig);
  m.sender = r.u32();
  get(r, m.rep);
  get(r, m.order);
}

void put(Writer& w, const CommitCertificate& c) {
  w.u8(static_cast<std::uint8_t>(c.kind));
  w.u32(static_cast<std::uint32_t>(c.replies.size()));
  for (const auto& rep : c.replies) put(w, rep);
}
void get(Reader& r, CommitCertificate& c) {
  auto kind = r.u8();
  if (kind > 1) throw DecodeError("bad certificate kind");
  c.kind = static_cast<CertKind>(kind);
  auto n = r.count();
  c.replies.resize(n);
  for (auto& rep : c.replies) get(r, rep);
}

void put(Writer& w, const CommitFastMsg& m) {
  w.tag(Tag::commit_fast);
  put(w, m.client);
  put(w, m.instance);
  put(w, m.cert);
}
void get(Reader& r, CommitFastMsg& m) {
  r.expect(Tag::commit_fast);
  get(r, m.client);
  get(r, m.instance);
  get(r, m.cert);
}

void put(Writer& w, const CommitMsg& m, bool with_sig) {
  w.tag(Tag::commit);
  put(w, m.client);
  put(w, m.instance);
  put(w, m.deps);
  w.u64(m.seq.value);
  put(w, m.cert);
  if (with_sig)
    put(w, m.sig);
  else
    w.bytes({});
}
void put(Writer& w, const CommitMsg& m) { put(w, m, true); }
void get(Reader& r, CommitMsg& m) {
  r.expect(Tag::commit);
  get(r, m.client);
  get(r, m.instance);
  get(r, m.deps);
  m.seq.value = r.u64();
  get(r, m.cert);
  get(r, m.sig);
}

void put(Writer& w, const CommitReplyMsg& m) {
  w.tag(Tag::commit_reply);
  put(w, m.instance);
  put(w, m.client);
  w.u64(m.t);
  put(w, m.rep);
  w.u32(m.sender);
}
void get(Reader& r, CommitReplyMsg& m) {
  r.expect(Tag::commit_reply);
  get(r, m.instance);
  get(r, m.client);
  m.t = r.u64();
  get(r, m.rep);
  m.sender = r.u32();
}

void put(Writer& w, const ResendReqMsg& m) {
  w.tag(Tag::resend_req);
  put(w, m.request);
  w.u32(m.sender);
}
void get(Reader& r, ResendReqMsg& m) {
  r.expect(Tag::resend_req);
  get(r, m.request);
  m.sender = r.u32();
}

void put(Writer& w, const PomMsg& m) {
  w.tag(Tag::pom);
  w.u64(m.owner.value);
  put(w, m.first);
  put(w, m.second);
}
void get(Reader& r, PomMsg& m) {
  r.expect(Tag::pom);
  m.owner.value = r.u64();
  get(r, m.first);
  get(r, m.second);
}

void put(Writer& w, const StartOwnerChangeMsg& m, bool with_sig) {
  w.tag(Tag::start_owner_change);
  w.u32(m.suspect);
  w.u64(m.owner.value);
  w.u32(m.sender);
  if (with_sig)
    put(w, m.sig);
  else
    w.bytes({});
}
void put(Writer& w, const StartOwnerChangeMsg& m) { put(w, m, true); }
void get(Reader& r, StartOwnerChangeMsg& m) {
  r.expect(Tag::start_owner_change);
  m.suspect = r.u32();
  m.owner.value = r.u64();
  m.sender = r.u32();
  get(r, m.sig);
}

void put(Writer& w, const CommitEvidence& e) {
  std::visit([&](const auto& m) { put(w, m); }, e);
}
void get(Reader& r, CommitEvidence& e) {
  // Peek the tag by decoding into whichever alternative it names.
  Reader probe = r;
  auto tag = probe.u8();
  if (tag == static_cast<std::uint8_t>(Tag::commit_fast)) {
    CommitFastMsg m;
    get(r, m);
    e = std::move(m);
  } else if (tag == static_cast<std::uint8_t>(Tag::commit)) {
    CommitMsg m;
    get(r, m);
    e = std::move(m);
  } else {
    throw DecodeError("bad commit evidence");
  }
}

template <typename T>
void put_opt(Writer& w, const std::optional<T>& v) {
  w.u8(v ? 1 : 0);
  if (v) put(w, *v);
}
template <typename T>
void get_opt(Reader& r, std::optional<T>& v) {
  if (r.flag()) {
    T x;
    get(r, x);
    v = std::move(x);
  } else {
    v.reset();
  }
}

void put(Writer& w, const HistoryEntry& e) {
  put(w, e.order);
  put(w, e.request);
  put_opt(w, e.commit);
}
void get(Reader& r, HistoryEntry& e) {
  get(r, e.order);
  get(r, e.request);
  get_opt(r, e.commit);
}

void put(Writer& w, const OwnerChangeMsg& m, bool with_sig) {
  w.tag(Tag::owner_change);
  w.u32(m.space);
  w.u64(m.new_owner.value);
  w.u32(m.sender);
  w.u64(m.checkpoint);
  w.u32(static_cast<std::uint32_t>(m.entries.size()));
  for (const auto& e : m.entries) put(w, e);
  put_opt(w, m.highest_commit);
  if (with_sig)
    put(w, m.sig);
  else
    w.bytes({});
}
void put(Writer& w, const OwnerChangeMsg& m) { put(w, m, true); }
void get(Reader& r, OwnerChangeMsg& m) {
  r.expect(Tag::owner_change);
  m.space = r.u32();
  m.new_owner.value = r.u64();
  m.sender = r.u32();
  m.checkpoint = r.u64();
  m.entries.resize(r.count());
  for (auto& e : m.entries) get(r, e);
  get_opt(r, m.highest_commit);
  get(r, m.sig);
}

void put(Writer& w, const SafeInstance& s) {
  put(w, s.order);
  put(w, s.request);
  put(w, s.deps);
  w.u64(s.seq.value);
}
void get(Reader& r, SafeInstance& s) {
  get(r, s.order);
  get(r, s.request);
  get(r, s.deps);
  s.seq.value = r.u64();
}

void put(Writer& w, const NewOwnerMsg& m, bool with_sig) {
  w.tag(Tag::new_owner);
  w.u32(m.space);
  w.u64(m.new_owner.value);
  w.u32(m.sender);
  w.u64(m.base);
  w.u32(static_cast<std::uint32_t>(m.proof.size()));
  for (const auto& p : m.proof) put(w, p);
  w.u32(static_cast<std::uint32_t>(m.safe.size()));
  for (const auto& s : m.safe) put(w, s);
  if (with_sig)
    put(w, m.sig);
  else
    w.bytes({});
}
void put(Writer& w, const NewOwnerMsg& m) { put(w, m, true); }
void get(Reader& r, NewOwnerMsg& m) {
  r.expect(Tag::new_owner);
  m.space = r.u32();
  m.new_owner.value = r.u64();
  m.sender = r.u32();
  m.base = r.u64();
  m.proof.resize(r.count());
  for (auto& p : m.proof) get(r, p);
  m.safe.resize(r.count());
  for (auto& s : m.safe) get(r, s);
  get(r, m.sig);
}

template <typename T>
Message decode_as(Reader& r) {
  T m;
  get(r, m);
  return m;
}

}  // namespace

Bytes encode(const Message& m) {
  Writer w;
  std::visit([&](const auto& msg) { put(w, msg); }, m);
  return w.take();
}

std::optional<Message> decode(ByteView bytes) {
  if (bytes.empty()) return std::nullopt;
  try {
    Reader r(bytes);
    Message out;
    switch (static_cast<Tag>(bytes[0])) {
      case Tag::request: out = decode_as<RequestMsg>(r); break;
      case Tag::spec_order: out = decode_as<SpecOrderMsg>(r); break;
      case Tag::spec_reply: out = decode_as<SpecReplyMsg>(r); break;
      case Tag::commit_fast: out = decode_as<CommitFastMsg>(r); break;
      case Tag::commit: out = decode_as<CommitMsg>(r); break;
      case Tag::commit_reply: out = decode_as<CommitReplyMsg>(r); break;
      case Tag::resend_req: out = decode_as<ResendReqMsg>(r); break;
      case Tag::pom: out = decode_as<PomMsg>(r); break;
      case Tag::start_owner_change: out = decode_as<StartOwnerChangeMsg>(r); break;
      case Tag::owner_change: out = decode_as<OwnerChangeMsg>(r); break;
      case Tag::new_owner: out = decode_as<NewOwnerMsg>(r); break;
      default: return std::nullopt;
    }
    if (!r.done()) return std::nullopt;
    return out;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

Bytes signing_payload(const RequestMsg& m) {
  Writer w;
  put(w, m, false, false);
  return w.take();
}

Bytes signing_payload(const SpecOrderCore& m) {
  Writer w;
  put(w, m, false);
  return w.take();
}

Bytes signing_payload(const SpecReplyMsg& m) {
  Writer w;
  put_reply_core(w, m);
  w.bytes({});
  return w.take();
}

Bytes signing_payload(const CommitMsg& m) {
  Writer w;
  put(w, m, false);
  return w.take();
}

Bytes signing_payload(const StartOwnerChangeMsg& m) {
  Writer w;
  put(w, m, false);
  return w.take();
}

Bytes signing_payload(const OwnerChangeMsg& m) {
  Writer w;
  put(w, m, false);
  return w.take();
}

Bytes signing_payload(const NewOwnerMsg& m) {
  Writer w;
  put(w, m, false);
  return w.take();
}

Digest request_digest(const RequestMsg& m) {
  Writer w;
  put(w, m, false, true);
  return crypto::digest(w.take());
}

Digest chain_digest(const Digest& prev, const SpecOrderCore& order) {
  Writer w;
  w.digest(prev);
  w.u64(order.owner.value);
  put(w, order.instance);
  put(w, order.deps);
  w.u64(order.seq.value);
  w.digest(order.request_digest);
  return crypto::digest(w.take());
}

Bytes encode_history(const std::vector<SafeInstance>& g) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(g.size()));
  for (const auto& s : g) put(w, s);
  return w.take();
}

}  // namespace ezbft
