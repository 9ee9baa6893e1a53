//! Writes the synthetic bilingual fixtures used by the CLI tests.
//!
//! Both corpora are random walks over the same concept graph: concepts in a
//! topic sit on a ring linked to their two nearest neighbours on each side,
//! with rare jumps to another topic. English and Chinese only differ in
//! surface forms, filler words and some English spelling variants.
//!
//! ```text
//! cargo run --example make_fixtures -- crates/core/tests/fixtures
//! ```

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (english forms, chinese form); the first english form is the canonical one.
const TOPICS: &[&[(&[&str], &str)]] = &[
    &[
        (&["hypertension", "high blood pressure"], "高血壓"),
        (&["heart"], "心臟"),
        (&["cholesterol"], "膽固醇"),
        (&["stroke"], "中風"),
        (&["palpitations"], "心悸"),
        (&["arrhythmia"], "心律不整"),
        (&["artery"], "動脈"),
        (&["angina"], "心絞痛"),
    ],
    &[
        (&["diarrhea", "diarrhoea"], "腹瀉"),
        (&["constipation"], "便秘"),
        (&["stomach"], "胃"),
        (&["nausea"], "噁心"),
        (&["vomiting"], "嘔吐"),
        (&["bloating"], "脹氣"),
        (&["ulcer"], "潰瘍"),
        (&["heartburn"], "胃灼熱"),
    ],
    &[
        (&["cough"], "咳嗽"),
        (&["asthma"], "氣喘"),
        (&["fever"], "發燒"),
        (&["phlegm", "sputum"], "痰"),
        (&["pneumonia"], "肺炎"),
        (&["throat"], "喉嚨"),
        (&["wheezing"], "喘鳴"),
        (&["bronchitis"], "支氣管炎"),
    ],
    &[
        (&["rash"], "皮疹"),
        (&["eczema"], "濕疹"),
        (&["itching", "itchiness"], "癢"),
        (&["acne"], "痘痘"),
        (&["corn"], "雞眼"),
        (&["wart"], "疣"),
        (&["dandruff"], "頭皮屑"),
        (&["blister"], "水泡"),
    ],
    &[
        (&["diabetes"], "糖尿病"),
        (&["insulin"], "胰島素"),
        (&["thyroid"], "甲狀腺"),
        (&["obesity"], "肥胖"),
        (&["glucose"], "血糖"),
        (&["gout"], "痛風"),
        (&["kidney"], "腎臟"),
        (&["urine"], "尿"),
    ],
    &[
        (&["insomnia"], "失眠"),
        (&["anxiety"], "焦慮"),
        (&["depression"], "憂鬱"),
        (&["headache"], "頭痛"),
        (&["migraine"], "偏頭痛"),
        (&["dizziness"], "頭暈"),
        (&["fatigue", "tiredness"], "疲勞"),
        (&["stress"], "壓力"),
    ],
];

const FILLER_EN: &[&str] = &["the", "my", "i", "have", "and", "a", "is", "with"];
const FILLER_ZH: &[&str] = &["的", "我", "有", "了", "很", "和"];

const DOCS: usize = 3000;
const SEED: u64 = 20;

struct Concept {
    topic: usize,
    slot: usize,
    en: Vec<String>,
    zh: String,
}

fn concepts() -> Vec<Concept> {
    let mut out = Vec::new();
    for (t, topic) in TOPICS.iter().enumerate() {
        for (s, (en, zh)) in topic.iter().enumerate() {
            out.push(Concept {
                topic: t,
                slot: s,
                en: en.iter().map(|w| w.to_string()).collect(),
                zh: zh.to_string(),
            });
        }
    }
    out
}

/// Concept ids visited by one walk.
fn walk(rng: &mut ChaCha8Rng, all: &[Concept]) -> Vec<usize> {
    let per_topic = TOPICS[0].len();
    let len = rng.random_range(10..=20);
    let mut cur = rng.random_range(0..all.len());
    let mut path = vec![cur];
    for _ in 1..len {
        let c = &all[cur];
        cur = if rng.random_bool(0.03) {
            rng.random_range(0..all.len())
        } else {
            let step = [-2i64, -1, 1, 2][rng.random_range(0..4)];
            let slot = (c.slot as i64 + step).rem_euclid(per_topic as i64) as usize;
            c.topic * per_topic + slot
        };
        path.push(cur);
    }
    path
}

fn render(rng: &mut ChaCha8Rng, path: &[usize], all: &[Concept], english: bool) -> String {
    let filler = if english { FILLER_EN } else { FILLER_ZH };
    let mut words: Vec<&str> = Vec::new();
    for &id in path {
        if rng.random_bool(0.3) {
            words.push(filler[rng.random_range(0..filler.len())]);
        }
        if english {
            let forms = &all[id].en;
            let form = if forms.len() > 1 && rng.random_bool(0.35) { &forms[1] } else { &forms[0] };
            words.push(form);
        } else {
            words.push(&all[id].zh);
        }
    }
    let mut line = words.join(" ");
    if english {
        line.push('.');
    }
    line
}

/// Token an english form becomes after phrase merging.
fn merged(form: &str) -> String {
    form.replace(' ', "_")
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tests/fixtures".into()));
    fs::create_dir_all(&dir)?;
    let all = concepts();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut en = fs::File::create(dir.join("corpus_en.txt"))?;
    let mut zh = fs::File::create(dir.join("corpus_zh.txt"))?;
    for _ in 0..DOCS {
        let p = walk(&mut rng, &all);
        writeln!(en, "{}", render(&mut rng, &p, &all, true))?;
        let p = walk(&mut rng, &all);
        writeln!(zh, "{}", render(&mut rng, &p, &all, false))?;
    }

    fs::write(dir.join("stopwords_en.txt"), FILLER_EN.join("\n") + "\n")?;
    fs::write(dir.join("stopwords_zh.txt"), FILLER_ZH.join("\n") + "\n")?;

    // Even slots are anchors, odd slots are held-out queries.
    let mut anchors = String::from("# source(zh)\ttarget(en)\n");
    let mut queries = String::new();
    let mut truth = String::new();
    for c in &all {
        if c.slot % 2 == 0 {
            anchors.push_str(&format!("{}\t{}\n", c.zh, merged(&c.en[0])));
            continue;
        }
        let key = format!("zh:{}", c.zh);
        queries.push_str(&key);
        queries.push('\n');
        for other in all.iter().filter(|o| o.topic == c.topic) {
            let label = u8::from(other.slot == c.slot);
            for form in &other.en {
                truth.push_str(&format!("{key}\t{}\t{label}\n", merged(form)));
            }
        }
    }
    fs::write(dir.join("anchors.tsv"), anchors)?;
    fs::write(dir.join("queries.txt"), queries)?;
    fs::write(dir.join("truth.tsv"), truth)?;
    Ok(())
}
