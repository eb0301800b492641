use serde_json::Value;
use stigsim_core::canon::from_hex;
use stigsim_core::contracts::{commit_hash, TaskId};
use stigsim_core::rng::RngStream;

fn load(name: &str) -> Value {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rng_streams_match_reference_outputs() {
    let g = load("rng.json");
    for s in g["streams"].as_array().unwrap() {
        let mut rng = RngStream::new(s["seed"].as_u64().unwrap(), s["name"].as_str().unwrap());
        let want: Vec<u64> = s["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        let got: Vec<u64> = (0..want.len()).map(|_| rng.next_u64()).collect();
        assert_eq!(got, want, "stream {s}");
    }
}

#[test]
fn commit_hashes_match_reference_outputs() {
    let g = load("commit_hash.json");
    for c in g["cases"].as_array().unwrap() {
        let args: Vec<Value> = serde_json::from_str(c["args"].as_str().unwrap()).unwrap();
        let salt: [u8; 32] = from_hex(c["salt_hex"].as_str().unwrap())
            .unwrap()
            .try_into()
            .unwrap();
        let h = commit_hash(
            TaskId(c["task"].as_u64().unwrap()),
            c["round"].as_u64().unwrap(),
            c["action"].as_str().unwrap(),
            &args,
            &salt,
        );
        assert_eq!(h.to_hex(), c["hash"].as_str().unwrap());
    }
}
