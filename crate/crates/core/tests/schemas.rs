//! The shipped schemas and data files agree with each other. This is a
//! key-level check, not a full JSON Schema validator.

use serde_json::Value;

fn read(name: &str) -> Value {
    let text = std::fs::read_to_string(spm_dse::data_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn conforms(v: &Value, schema: &Value, root: &Value, at: &str) {
    let schema = match schema.get("$ref").and_then(Value::as_str) {
        Some(r) => &root["$defs"][r.trim_start_matches("#/$defs/")],
        None => schema,
    };
    match schema["type"].as_str() {
        Some("object") => {
            let obj = v.as_object().unwrap_or_else(|| panic!("{at}: not an object"));
            for req in schema["required"].as_array().into_iter().flatten() {
                assert!(obj.contains_key(req.as_str().unwrap()), "{at}: missing {req}");
            }
            if let Some(props) = schema["properties"].as_object() {
                for (k, x) in obj {
                    match props.get(k) {
                        Some(s) => conforms(x, s, root, &format!("{at}.{k}")),
                        None => assert!(schema["additionalProperties"] != false, "{at}: unexpected {k}"),
                    }
                }
            }
        }
        Some("array") => {
            for (i, x) in v.as_array().unwrap().iter().enumerate() {
                conforms(x, &schema["items"], root, &format!("{at}[{i}]"));
            }
        }
        Some("integer") => assert!(v.is_u64(), "{at}: not a non-negative integer"),
        Some("number") => assert!(v.is_number(), "{at}: not a number"),
        Some("string") => assert!(v.is_string(), "{at}: not a string"),
        Some("boolean") => assert!(v.is_boolean(), "{at}: not a boolean"),
        _ => {}
    }
}

#[test]
fn shipped_workloads_match_schema() {
    let schema = read("workload.schema.json");
    for w in ["capsnet.workload.json", "deepcaps.workload.json"] {
        conforms(&read(w), &schema, &schema, w);
    }
}

#[test]
fn shipped_cost_table_matches_schema() {
    let schema = read("cost_table.schema.json");
    conforms(&read("cost32nm.json"), &schema, &schema, "cost32nm.json");
}

#[test]
fn loader_rejects_what_schema_rejects() {
    let extra = r#"{"network":"x","operations":[{"name":"a","usage":{"data":1,"weight":1,"acc":1},"cycles":1}],"extra":1}"#;
    assert!(spm_dse::workload::WorkloadTrace::from_json_str(extra, "x.json".as_ref()).is_err());
    let ok = r#"{"network":"x","operations":[{"name":"a","usage":{"data":1,"weight":1,"acc":1},"cycles":1}]}"#;
    let t = spm_dse::workload::WorkloadTrace::from_json_str(ok, "x.json".as_ref()).unwrap();
    let schema = read("workload.schema.json");
    conforms(&serde_json::from_str(&t.to_json()).unwrap(), &schema, &schema, "round trip");
}
