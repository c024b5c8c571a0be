"""Seeded synthetic fixture corpus: controls, labeled checks, feedback pool.

Real regulation corpora are not redistributable, so tests and demos run
against a generated stand-in with the same schema: a catalog of controls
across ten families and template-generated techspec checks labeled with
their controls. Four well-known NIST mappings (password complexity to
IA-5(1), admin-count limits to AC-6, disk encryption to SC-28 and SC-13)
are embedded verbatim so end-to-end behavior can be checked against
recognizable queries.

Each topic has a common phrasing and a rarer synonym phrasing; the
feedback pool leans heavily on the rare phrasing, which is what gives
feedback iterations something genuine to teach.
"""

from __future__ import annotations

import argparse
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import RegulationControl, TechspecCheck, checks_to_jsonl, controls_to_jsonl

NIST_REGULATION_ID = "NIST-800-53-v4"
HIPAA_REGULATION_ID = "HIPAA-164"


@dataclass(frozen=True)
class Topic:
    slug: str
    family: str
    core: tuple[str, ...]
    common: tuple[str, ...]  # frequent phrasing
    rare: tuple[str, ...]  # synonym phrasing, underrepresented in training
    formal: str  # control-text phrasing (regulations read like legal prose)


TOPICS = (
    Topic("session-lock", "AC", ("session", "lock", "inactivity"),
          ("timeout", "idle", "screen", "minutes"),
          ("reauthentication", "dormant", "suspension", "interval"),
          "session locks after organization-defined inactivity"),
    Topic("remote-access", "AC", ("remote", "access", "gateway"),
          ("vpn", "tunnel", "endpoint", "client"),
          ("bastion", "jumphost", "broker", "ingress"),
          "managed access points for all remote connections"),
    Topic("account-provisioning", "AC", ("account", "provisioning", "lifecycle"),
          ("creation", "disable", "removal", "approvals"),
          ("onboarding", "deactivation", "revocation", "workflow"),
          "account management procedures for issuing and revoking accounts"),
    Topic("shared-accounts", "AC", ("shared", "group", "credentials"),
          ("generic", "guest", "anonymous", "prohibited"),
          ("communal", "impersonal", "vendor", "restricted"),
          "conditions for group and shared account usage"),
    Topic("audit-logging", "AU", ("audit", "events", "logging"),
          ("syslog", "records", "timestamps", "capture"),
          ("journald", "trail", "telemetry", "emission"),
          "audit record generation for defined auditable events"),
    Topic("log-retention", "AU", ("retention", "logs", "storage"),
          ("days", "archive", "rotation", "capacity"),
          ("preservation", "lifecycle", "expiry", "quota"),
          "audit record retention consistent with records schedules"),
    Topic("log-review", "AU", ("review", "analysis", "alerts"),
          ("daily", "reports", "anomalies", "correlation"),
          ("triage", "inspection", "findings", "escalation"),
          "review and analysis of audit records for inappropriate activity"),
    Topic("baseline-config", "CM", ("baseline", "configuration", "hardening"),
          ("benchmark", "profile", "settings", "deviation"),
          ("gold", "image", "drift", "variance"),
          "current baseline configurations under configuration control"),
    Topic("software-inventory", "CM", ("inventory", "software", "components"),
          ("installed", "packages", "catalog", "authorized"),
          ("sbom", "manifest", "registry", "whitelisting"),
          "documented inventories of system components and software"),
    Topic("change-approval", "CM", ("change", "approval", "control"),
          ("tickets", "board", "testing", "rollback"),
          ("cab", "signoff", "staging", "backout"),
          "change control with security impact analysis"),
    Topic("backup-schedule", "CP", ("backup", "copies", "schedule"),
          ("nightly", "incremental", "offsite", "restore"),
          ("snapshots", "replication", "vault", "recovery"),
          "backups of user-level and system-level information"),
    Topic("recovery-testing", "CP", ("recovery", "contingency", "testing"),
          ("drill", "exercise", "annual", "failover"),
          ("tabletop", "simulation", "resilience", "cutover"),
          "contingency plan testing to determine effectiveness"),
    Topic("multifactor-auth", "IA", ("multifactor", "authentication", "factor"),
          ("mfa", "token", "otp", "smartcard"),
          ("twofactor", "authenticator", "fido", "challenge"),
          "multifactor authentication for network access to accounts"),
    Topic("credential-rotation", "IA", ("credential", "rotation", "expiration"),
          ("expiry", "age", "renewal", "maximum"),
          ("refresh", "revalidation", "staleness", "turnover"),
          "authenticator refresh at organization-defined intervals"),
    Topic("device-identifiers", "IA", ("device", "identifier", "registration"),
          ("mac", "serial", "enrollment", "unique"),
          ("fingerprint", "attestation", "binding", "provenance"),
          "device identification and authentication before connection"),
    Topic("vulnerability-scanning", "RA", ("vulnerability", "scanning", "findings"),
          ("scanner", "weekly", "cve", "remediation"),
          ("assessment", "probes", "exposure", "patching"),
          "vulnerability scanning and remediation of legitimate findings"),
    Topic("risk-register", "RA", ("risk", "register", "assessment"),
          ("likelihood", "impact", "ranking", "owners"),
          ("appetite", "scoring", "heatmap", "treatment"),
          "risk assessments considering threats and vulnerabilities"),
    Topic("tls-transport", "SC", ("tls", "transport", "certificates"),
          ("https", "protocol", "version", "handshake"),
          ("ssl", "ciphersuite", "pki", "trust"),
          "confidentiality and integrity of transmitted information"),
    Topic("network-segmentation", "SC", ("segmentation", "network", "zones"),
          ("firewall", "subnets", "vlan", "rules"),
          ("microsegmentation", "perimeter", "enclave", "policyset"),
          "boundary protection at managed interfaces"),
    Topic("dns-security", "SC", ("dns", "resolution", "name"),
          ("resolver", "dnssec", "queries", "spoofing"),
          ("validation", "recursion", "cache", "poisoning"),
          "secure name and address resolution services"),
    Topic("session-tokens", "SC", ("token", "session", "cookies"),
          ("secure", "httponly", "random", "invalidation"),
          ("nonce", "entropy", "bearer", "expiry"),
          "protection of session authenticity"),
    Topic("malware-defense", "SI", ("malware", "defense", "scanning"),
          ("antivirus", "signatures", "quarantine", "realtime"),
          ("edr", "heuristics", "sandboxing", "detonation"),
          "malicious code protection at entry and exit points"),
    Topic("patch-management", "SI", ("patch", "updates", "flaws"),
          ("hotfix", "monthly", "severity", "deployment"),
          ("remediation", "cadence", "backport", "staging"),
          "flaw remediation within organization-defined timeframes"),
    Topic("integrity-monitoring", "SI", ("integrity", "monitoring", "checksums"),
          ("hashes", "tripwire", "verification", "files"),
          ("attestation", "digests", "tamper", "measurement"),
          "software and information integrity verification tools"),
    Topic("input-validation", "SI", ("input", "validation", "sanitization"),
          ("injection", "encoding", "parameters", "filtering"),
          ("canonicalization", "escaping", "fuzzing", "taint"),
          "checking the validity of information inputs"),
    Topic("media-sanitization", "MP", ("media", "sanitization", "disposal"),
          ("wipe", "degauss", "shred", "erasure"),
          ("purging", "destruction", "overwrite", "decommission"),
          "media sanitization prior to disposal or reuse"),
    Topic("removable-media", "MP", ("removable", "usb", "media"),
          ("devices", "blocked", "autorun", "ports"),
          ("peripherals", "massstorage", "mounting", "exemptions"),
          "restrictions on the use of portable storage devices"),
    Topic("facility-access", "PE", ("facility", "physical", "badge"),
          ("doors", "visitors", "escort", "readers"),
          ("mantrap", "turnstile", "keycard", "vestibule"),
          "physical access authorizations at entry and exit points"),
)

# The four embedded mappings; the disk-encryption topic carries both
# SC-28 and SC-13, mirroring how encryption-at-rest checks map in practice.
SPECIAL_TOPICS = {
    "SC-28": Topic("data-at-rest", "SC", ("data", "rest", "protection"),
                   ("disk", "disks", "encrypted", "encryption"),
                   ("volume", "volumes", "cipher", "luks"),
                   "protection of the confidentiality and integrity of information at rest"),
    "SC-13": Topic("cryptographic-protection", "SC", ("cryptographic", "cryptography", "keys"),
                   ("encryption", "algorithms", "fips", "strength"),
                   ("cipher", "modules", "kms", "primitives"),
                   "cryptographic protection using defined cryptography for each use"),
    "AC-6": Topic("least-privilege", "AC", ("privilege", "least", "authorized"),
                  ("admin", "administrators", "accounts", "limited"),
                  ("superuser", "root", "elevation", "entitlements"),
                  "the principle of least privilege for users and processes"),
    "IA-5(1)": Topic("password-complexity", "IA", ("password", "passwords", "policy"),
                     ("uppercase", "complexity", "length", "characters"),
                     ("passphrase", "strength", "composition", "classes"),
                     "password-based authentication with enforced complexity and change of characters"),
}

SPECIAL_TITLES = {
    "SC-28": "Protection of Information at Rest",
    "SC-13": "Cryptographic Protection",
    "AC-6": "Least Privilege",
    "IA-5(1)": "Authenticator Management | Password-Based Authentication",
}

# (check title, labels) rows every fixture embeds verbatim
EMBEDDED_NIST_CHECKS = (
    ("Check whether password policy requires at least one uppercase letter", ("IA-5(1)",)),
    ("Ensure no more than 3 user administrators are defined for Kubernetes containers", ("AC-6",)),
    ("Check whether data disks are encrypted", ("SC-28", "SC-13")),
)

PLATFORMS = (
    ("linux", "server"),
    ("windows", "host"),
    ("kubernetes", "cluster"),
    ("database", "instance"),
    ("network", "appliance"),
    ("cloud", "tenant"),
    ("webserver", "application"),
)

VERBS = ("Ensure", "Verify", "Check whether", "Confirm that", "Require that")

DESCRIPTION_FORMS = (
    "The {plat} {plat2} must enforce {w2} {w3} for all {plat} workloads.",
    "Settings for {w2} and {w3} on the {plat} {plat2} follow the approved profile.",
    "Administrators configure {w2} {w3} {w6} on each {plat} {plat2}.",
    "{W2} {w3} applies to every {plat} {plat2} in scope.",
)

RATIONALE_FORMS = (
    "Without {w4} controls, {risk}.",
    "Missing {w4} {w7} means {risk}.",
    "If {w4} is absent, {risk}.",
)

FIX_FORMS = (
    "Configure {w5} on the {plat} {plat2}.",
    "Enable {w5} {w6} for the {plat} {plat2} and document the value.",
    "Remediate by enforcing {w5} via the {plat} management tooling.",
)

RISKS = (
    "unauthorized activity may go undetected",
    "attackers can escalate their foothold",
    "sensitive information may be exposed",
    "recovery objectives cannot be met",
    "the system drifts from its approved posture",
)


@dataclass
class FixtureCorpus:
    regulation_id: str
    controls: list[RegulationControl]
    checks: list[TechspecCheck]
    pool: list[TechspecCheck]


def _control_text(topic: Topic, platform: str) -> str:
    words = " ".join(topic.core)
    return (
        f"The organization implements {topic.formal} for {platform} systems. "
        f"Policies and procedures address {words} requirements and assign "
        f"responsibility for monitoring compliance."
    )


def _sample_words(rng: random.Random, topic: Topic, rare: bool, n: int) -> list[str]:
    variant = topic.rare if rare else topic.common
    pool = list(topic.core) + list(variant) * 2  # phrasing dominates
    return [rng.choice(pool) for _ in range(n)]


def _make_check(
    rng: random.Random,
    check_id: str,
    topic: Topic,
    platform: tuple[str, str],
    labels: frozenset[str],
    rare: bool,
) -> TechspecCheck:
    w = _sample_words(rng, topic, rare, 8)
    plat, plat2 = platform
    fields = {
        "plat": plat, "plat2": plat2,
        "w2": w[2], "W2": w[2].capitalize(), "w3": w[3], "w4": w[4],
        "w5": w[5], "w6": w[6], "w7": w[7],
        "risk": rng.choice(RISKS),
    }
    title = f"{rng.choice(VERBS)} {plat} {w[0]} {w[1]}"
    description = rng.choice(DESCRIPTION_FORMS).format(**fields)
    rationale = rng.choice(RATIONALE_FORMS).format(**fields)
    fix = rng.choice(FIX_FORMS).format(**fields)
    return TechspecCheck(
        check_id=check_id,
        title=title,
        description=description,
        rationale=rationale,
        fix=fix,
        source="SYN-STIG",
        labels=labels,
    )


def synthetic_corpus(
    seed: int = 7,
    n_topics: int = 28,
    n_platforms: int = 7,
    checks_per_control: int = 10,
    pool_size: int = 360,
    rare_share: float = 0.12,
    pool_rare_share: float = 0.85,
    secondary_prob: float = 0.3,
) -> FixtureCorpus:
    """Generate the NIST-style fixture corpus deterministically.

    Defaults produce 200 controls (28 topics x 7 platforms + 4 embedded)
    and 2000 labeled checks, plus a 360-check feedback pool biased toward
    each topic's rare phrasing.
    """
    if n_topics > len(TOPICS) or n_platforms > len(PLATFORMS):
        raise ValueError("not enough topic/platform templates")
    rng = random.Random(seed)
    controls: list[RegulationControl] = []
    control_topics: dict[str, Topic] = {}
    control_platform: dict[str, tuple[str, str]] = {}
    related: dict[str, str] = {}

    # embedded controls with fixed, recognizable ids
    for control_id, topic in SPECIAL_TOPICS.items():
        controls.append(
            RegulationControl(
                regulation_id=NIST_REGULATION_ID,
                control_id=control_id,
                family=topic.family,
                title=SPECIAL_TITLES[control_id],
                text=_control_text(topic, "information"),
            )
        )
        control_topics[control_id] = topic
        control_platform[control_id] = rng.choice(PLATFORMS)
    related["SC-28"] = "SC-13"
    related["SC-13"] = "SC-28"

    # generated controls: one per (topic, platform)
    reserved = {("SC", 28), ("SC", 13), ("AC", 6), ("IA", 5)}
    family_counter: dict[str, int] = {}
    grid_ids: dict[str, list[str]] = {}
    for topic in TOPICS[:n_topics]:
        topic_ids = []
        for platform in PLATFORMS[:n_platforms]:
            n = family_counter.get(topic.family, 0) + 1
            while (topic.family, n) in reserved:
                n += 1
            family_counter[topic.family] = n
            control_id = f"{topic.family}-{n}"
            controls.append(
                RegulationControl(
                    regulation_id=NIST_REGULATION_ID,
                    control_id=control_id,
                    family=topic.family,
                    title=f"{topic.slug.replace('-', ' ').title()} ({platform[0]})",
                    text=_control_text(topic, platform[0]),
                )
            )
            control_topics[control_id] = topic
            control_platform[control_id] = platform
            topic_ids.append(control_id)
        grid_ids[topic.slug] = topic_ids
        # controls of one topic relate across platforms
        for i, cid in enumerate(topic_ids):
            related[cid] = topic_ids[(i + 1) % len(topic_ids)]

    def labels_for(control_id: str) -> frozenset[str]:
        labels = {control_id}
        if control_id in ("SC-28",):
            if rng.random() < 0.7:
                labels.add("SC-13")
        elif control_id in related and rng.random() < secondary_prob:
            labels.add(related[control_id])
        return frozenset(labels)

    checks: list[TechspecCheck] = []
    counter = 0
    for control in controls:
        topic = control_topics[control.control_id]
        platform = control_platform[control.control_id]
        for _ in range(checks_per_control):
            counter += 1
            checks.append(
                _make_check(
                    rng,
                    f"CHK-{counter:05d}",
                    topic,
                    platform,
                    labels_for(control.control_id),
                    rare=rng.random() < rare_share,
                )
            )

    # overwrite the first check of each embedded control with its
    # recognizable verbatim row
    by_label: dict[str, int] = {}
    for i, check in enumerate(checks):
        for label in check.labels:
            by_label.setdefault(label, i)
    for title, labels in EMBEDDED_NIST_CHECKS:
        slot = by_label[labels[0]]
        checks[slot] = TechspecCheck(
            check_id=checks[slot].check_id,
            title=title,
            source="SYN-STIG",
            labels=frozenset(labels),
        )

    pool: list[TechspecCheck] = []
    pool_controls = [c.control_id for c in controls]
    for i in range(pool_size):
        control_id = pool_controls[i % len(pool_controls)]
        topic = control_topics[control_id]
        platform = control_platform[control_id]
        counter += 1
        pool.append(
            _make_check(
                rng,
                f"POOL-{counter:05d}",
                topic,
                platform,
                labels_for(control_id),
                rare=rng.random() < pool_rare_share,
            )
        )

    return FixtureCorpus(
        regulation_id=NIST_REGULATION_ID, controls=controls, checks=checks, pool=pool
    )


def small_corpus(seed: int = 7, checks_per_control: int = 6, pool_size: int = 40) -> FixtureCorpus:
    """A scaled-down corpus for fast unit and service tests."""
    return synthetic_corpus(
        seed=seed,
        n_topics=6,
        n_platforms=3,
        checks_per_control=checks_per_control,
        pool_size=pool_size,
    )


def hipaa_fixture() -> tuple[list[RegulationControl], list[TechspecCheck]]:
    """A tiny second regulation, including the embedded encryption rule."""
    rows = (
        ("164.312(a)(1)", "Access control",
         "Implement technical policies and procedures that allow access only to "
         "authorized persons and software programs"),
        ("164.312(a)(2)(iv)", "Encryption and decryption",
         "Implement a mechanism to encrypt and decrypt electronic protected health information"),
        ("164.312(b)", "Audit controls",
         "Implement hardware software and procedural mechanisms that record and examine "
         "activity in systems containing electronic protected health information"),
        ("164.312(c)(1)", "Integrity",
         "Implement policies and procedures to protect electronic protected health "
         "information from improper alteration or destruction"),
        ("164.312(d)", "Person or entity authentication",
         "Implement procedures to verify that a person or entity seeking access is the one claimed"),
        ("164.312(e)(1)", "Transmission security",
         "Implement technical security measures to guard against unauthorized access to "
         "information transmitted over an electronic communications network"),
    )
    controls = [
        RegulationControl(
            regulation_id=HIPAA_REGULATION_ID,
            control_id=cid,
            family=cid.split("(")[0],
            title=title,
            text=text,
        )
        for cid, title, text in rows
    ]
    checks = [
        TechspecCheck(
            check_id="HIPAA-CHK-00001",
            title="Check whether data disks are encrypted",
            source="SYN-STIG",
            labels=frozenset({"164.312(a)(2)(iv)"}),
        ),
        TechspecCheck(
            check_id="HIPAA-CHK-00002",
            title="Verify audit activity records are examined for health information systems",
            source="SYN-STIG",
            labels=frozenset({"164.312(b)"}),
        ),
    ]
    return controls, checks


def write_fixture_files(corpus: FixtureCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write the corpus (and the HIPAA side catalog) as JSONL files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hipaa_controls, hipaa_checks = hipaa_fixture()
    paths = {
        "controls": out / "controls.jsonl",
        "checks": out / "checks.jsonl",
        "pool": out / "pool.jsonl",
        "hipaa_controls": out / "hipaa-controls.jsonl",
        "hipaa_checks": out / "hipaa-checks.jsonl",
    }
    paths["controls"].write_text(controls_to_jsonl(corpus.controls), encoding="utf-8")
    paths["checks"].write_text(checks_to_jsonl(corpus.checks), encoding="utf-8")
    paths["pool"].write_text(checks_to_jsonl(corpus.pool), encoding="utf-8")
    paths["hipaa_controls"].write_text(controls_to_jsonl(hipaa_controls), encoding="utf-8")
    paths["hipaa_checks"].write_text(checks_to_jsonl(hipaa_checks), encoding="utf-8")
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate the synthetic fixture corpus")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--checks-per-control", type=int, default=10)
    parser.add_argument("--pool-size", type=int, default=360)
    args = parser.parse_args(argv)
    corpus = synthetic_corpus(
        seed=args.seed,
        checks_per_control=args.checks_per_control,
        pool_size=args.pool_size,
    )
    paths = write_fixture_files(corpus, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
