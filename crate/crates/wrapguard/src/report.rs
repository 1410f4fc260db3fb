//! JSON and text renderings of verification and audit reports.

use serde_json::{json, Map, Value};
use wrapguard_core::xmldsig::{AuditReport, Certificate, StageOutcome, VerificationReport};

fn cert_fields(prefix: &str, cert: Option<&Certificate>, out: &mut Map<String, Value>) {
    let (cn, dn, fp) = match cert {
        Some(c) => (
            json!(c.subject().common_name),
            json!(c.subject().distinguished_name),
            json!(c.fingerprint().to_string()),
        ),
        None => (Value::Null, Value::Null, Value::Null),
    };
    out.insert(format!("{prefix}_common_name"), cn);
    out.insert(format!("{prefix}_subject"), dn);
    out.insert(format!("{prefix}_fingerprint"), fp);
}

/// Flat key-value object mirroring the report fields.
pub fn verification_json(report: &VerificationReport) -> Value {
    let mut m = Map::new();
    m.insert("verifier".into(), json!(report.verifier.as_str()));
    m.insert("verdict".into(), json!(report.verdict.as_str()));
    m.insert("stage_reached".into(), json!(report.stage_reached.as_str()));
    let f = report.failure.as_ref();
    m.insert("failure_stage".into(), json!(f.map(|f| f.stage.as_str())));
    m.insert("failure_kind".into(), json!(f.map(|f| f.kind.as_str())));
    m.insert("failure_reason".into(), json!(f.map(|f| &f.reason)));
    m.insert(
        "failure_path".into(),
        json!(f.and_then(|f| f.path.as_ref()).map(|p| p.to_string())),
    );
    cert_fields("signer", report.signer_certificate.as_ref(), &mut m);
    cert_fields("key", report.key_certificate.as_ref(), &mut m);
    let locations: Vec<Value> = report
        .verified_locations
        .iter()
        .map(|l| {
            json!({
                "expression": l.expression.as_ref().map(|e| e.to_string()),
                "uri": l.uri,
                "path": l.path.to_string(),
            })
        })
        .collect();
    m.insert("verified_locations".into(), Value::Array(locations));
    Value::Object(m)
}

fn outcome_str(o: StageOutcome) -> &'static str {
    match o {
        StageOutcome::Passed => "passed",
        StageOutcome::Failed => "failed",
        StageOutcome::Skipped => "skipped",
    }
}

pub fn audit_json(report: &AuditReport) -> Value {
    let stages: Vec<Value> = report
        .stages
        .iter()
        .map(|s| {
            json!({
                "stage": s.stage.as_str(),
                "outcome": outcome_str(s.outcome),
                "findings": s.findings.iter().map(|f| json!({
                    "kind": f.kind.as_str(),
                    "message": f.message,
                    "path": f.path.as_ref().map(|p| p.to_string()),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "passed": report.passed(), "stages": stages })
}

pub fn verification_text(report: &VerificationReport) -> String {
    let mut out = format!(
        "{} ({} verifier, stage reached: {})\n",
        report.verdict.as_str(),
        report.verifier.as_str(),
        report.stage_reached
    );
    if let Some(f) = &report.failure {
        out += &format!("failure: {f}\n");
    }
    for l in &report.verified_locations {
        out += &format!("signed: {}", l.path);
        if let Some(e) = &l.expression {
            out += &format!(" via {e}");
        }
        out += "\n";
    }
    if let Some(c) = &report.signer_certificate {
        out += &format!("signer: {}\n", c.subject().distinguished_name);
    }
    out
}

/// One checklist line per stage, findings indented below.
pub fn audit_text(report: &AuditReport) -> String {
    let mut out = String::new();
    for s in &report.stages {
        let mark = match s.outcome {
            StageOutcome::Passed => "[pass]",
            StageOutcome::Failed => "[FAIL]",
            StageOutcome::Skipped => "[skip]",
        };
        out += &format!("{mark} {}\n", s.stage);
        for f in &s.findings {
            out += &format!("       {}: {}", f.kind, f.message);
            if let Some(p) = &f.path {
                out += &format!(" at {p}");
            }
            out += "\n";
        }
    }
    out
}
