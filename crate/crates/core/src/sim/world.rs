//! Synthetic topical web with a hidden blacklist.
//!
//! Each domain writes about one benign home topic. Blacklisted domains
//! additionally devote at least `blacklist_topic_bias` of every document's
//! generated tokens to the sensitive topics, so pages blocked for similar
//! reasons really do share vocabulary. Tokens are drawn Zipf-style
//! (exponent [`ZIPF_EXPONENT`]) from a per-domain permutation of each topic's
//! vocabulary. Output is a pure function of the spec.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::{io_err, SimError};
use crate::textproc::{self, CorpusModel};

pub const ZIPF_EXPONENT: f64 = 1.1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORPUS_DIR: &str = "corpus";
pub const BACKGROUND_FILE: &str = "background.tsv";
pub const STOPWORDS_FILE: &str = "stopwords.txt";

const DOMAIN_STEMS: [&str; 10] = [
    "herald", "forum", "journal", "daily", "voice", "press", "post", "times", "review", "blog",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topic {
    pub name: String,
    #[serde(default)]
    pub sensitive: bool,
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub rng_seed: u64,
    pub num_domains: usize,
    /// Inclusive `[min, max]` documents per domain.
    pub docs_per_domain: [usize; 2],
    /// Inclusive `[min, max]` generated tokens per document.
    #[serde(default = "default_tokens_per_doc")]
    pub tokens_per_doc: [usize; 2],
    pub topics: Vec<Topic>,
    /// Filler vocabulary; also written out as the stopword list.
    #[serde(default)]
    pub common_words: Vec<String>,
    /// Share of a document's non-sensitive tokens drawn from `common_words`.
    #[serde(default)]
    pub common_fraction: f64,
    /// Explicit blacklisted domain names; when empty, `blacklist_count`
    /// domains are chosen at random.
    #[serde(default)]
    pub blacklist: Vec<String>,
    #[serde(default)]
    pub blacklist_count: usize,
    pub blacklist_topic_bias: f64,
    /// Share of clean-domain tokens drawn from sensitive topics.
    #[serde(default)]
    pub sensitive_leak: f64,
    #[serde(default = "default_suffix")]
    pub domain_suffix: String,
}

fn default_tokens_per_doc() -> [usize; 2] {
    [120, 240]
}

fn default_suffix() -> String {
    "example".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub name: String,
    pub blacklisted: bool,
    pub home_topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive_topic: Option<String>,
    pub urls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: WorldSpec,
    pub domains: Vec<DomainEntry>,
    pub blacklist: Vec<String>,
    pub document_count: usize,
}

impl Manifest {
    pub fn load(world_dir: &Path) -> Result<Self, SimError> {
        let path = world_dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn is_blacklisted(&self, domain: &str) -> bool {
        self.blacklist.iter().any(|b| b == domain)
    }

    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().flat_map(|d| d.urls.iter().map(String::as_str))
    }
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn topic(name: &str, sensitive: bool, vocab: &[&str]) -> Topic {
    Topic {
        name: name.to_string(),
        sensitive,
        vocabulary: words(vocab),
    }
}

impl WorldSpec {
    /// 60 domains, 12 blacklisted, 540 to 660 documents, three sensitive
    /// topics and eight benign ones.
    pub fn desk_scale(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            num_domains: 60,
            docs_per_domain: [9, 11],
            tokens_per_doc: [120, 240],
            topics: vec![
                topic("dissent", true, &[
                    "protest", "dissident", "petition", "crackdown", "activist", "detained",
                    "tiananmen", "uprising", "demonstrators", "persecution", "arrests",
                    "massacre", "democracy", "liberty", "rally", "square", "vigil", "martyrs",
                    "tanks", "students", "hunger", "strike", "manifesto", "charter",
                ]),
                topic("autonomy", true, &[
                    "tibet", "uyghur", "lama", "exile", "xinjiang", "monastery", "autonomy",
                    "independence", "separatist", "camps", "internment", "minority", "lhasa",
                    "kashgar", "refugees", "sovereignty", "occupation", "pilgrims", "monks",
                    "reeducation", "diaspora", "homeland", "dalai", "heritage",
                ]),
                topic("faith", true, &[
                    "falun", "gong", "meditation", "practitioners", "qigong", "organ",
                    "harvesting", "underground", "church", "sect", "banned", "prisoners",
                    "conscience", "torture", "testimony", "believers", "scripture",
                    "worship", "clergy", "bishops", "raids", "congregation", "zhuan", "truth",
                ]),
                topic("cooking", false, &[
                    "recipe", "garlic", "simmer", "noodles", "dumplings", "ginger", "broth",
                    "skillet", "roast", "pepper", "bake", "flour", "sauce", "vinegar", "wok",
                    "marinade", "tofu", "scallion", "braised", "dessert", "pastry", "spices",
                ]),
                topic("football", false, &[
                    "striker", "goalkeeper", "midfield", "penalty", "league", "transfer",
                    "derby", "referee", "tactics", "fixture", "stadium", "champions",
                    "defender", "winger", "offside", "relegation", "trophy", "supporters",
                    "kickoff", "equaliser", "coach", "squad",
                ]),
                topic("gadgets", false, &[
                    "smartphone", "battery", "firmware", "processor", "laptop", "charger",
                    "bluetooth", "display", "benchmark", "headphones", "keyboard", "tablet",
                    "camera", "sensor", "wireless", "gigabyte", "chipset", "screen",
                    "accessory", "unboxing", "specs", "upgrade",
                ]),
                topic("travel", false, &[
                    "itinerary", "hostel", "passport", "backpacking", "beaches", "airline",
                    "luggage", "sightseeing", "hiking", "island", "visa", "souvenirs",
                    "ferry", "resort", "guidebook", "museum", "cathedral", "trekking",
                    "lagoon", "booking", "layover", "scenic",
                ]),
                topic("gardening", false, &[
                    "compost", "seedlings", "tomatoes", "pruning", "mulch", "perennials",
                    "soil", "greenhouse", "watering", "orchids", "fertilizer", "hedges",
                    "shrubs", "bulbs", "weeds", "harvest", "raised", "beds", "saplings",
                    "roses", "lavender", "trellis",
                ]),
                topic("finance", false, &[
                    "dividend", "portfolio", "mortgage", "inflation", "bonds", "equities",
                    "savings", "budget", "pension", "brokerage", "interest", "rates",
                    "earnings", "valuation", "hedge", "liquidity", "forex", "yields",
                    "investors", "quarterly", "recession", "tariffs",
                ]),
                topic("music", false, &[
                    "album", "guitar", "concert", "melody", "drummer", "vinyl", "lyrics",
                    "chorus", "orchestra", "symphony", "playlist", "bassist", "encore",
                    "festival", "acoustic", "soprano", "rehearsal", "tempo", "quartet",
                    "headliner", "remix", "ballad",
                ]),
                topic("science", false, &[
                    "telescope", "galaxy", "molecule", "neutron", "genome", "fossil",
                    "laboratory", "experiment", "hypothesis", "particle", "enzyme",
                    "asteroid", "quantum", "microscope", "species", "climate", "glacier",
                    "volcano", "orbit", "protein", "catalyst", "specimen",
                ]),
            ],
            common_words: words(&[
                "the", "and", "of", "to", "in", "is", "for", "on", "that", "with", "as", "was",
                "it", "by", "at", "from", "this", "be", "are", "have", "has", "an", "or", "not",
                "but", "they", "their", "which", "we", "more", "will", "one", "all", "about",
                "after", "new", "people", "year", "said", "also", "would", "other", "some",
                "time", "there", "been", "when", "who", "can", "first", "into", "its", "our",
                "out", "up", "many", "most", "over", "than", "them", "these", "what", "you",
                "your", "how", "like", "just", "very", "where", "while", "during", "before",
                "because", "through", "since", "another", "being", "week", "today", "news",
            ]),
            common_fraction: 0.45,
            blacklist: Vec::new(),
            blacklist_count: 12,
            blacklist_topic_bias: 0.75,
            sensitive_leak: 0.03,
            domain_suffix: default_suffix(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.num_domains == 0 {
            return bad("num_domains must be positive".into());
        }
        let [dmin, dmax] = self.docs_per_domain;
        if dmin == 0 || dmin > dmax {
            return bad(format!("docs_per_domain {dmin}..={dmax} invalid"));
        }
        let [tmin, tmax] = self.tokens_per_doc;
        if tmin == 0 || tmin > tmax {
            return bad(format!("tokens_per_doc {tmin}..={tmax} invalid"));
        }
        for (name, v) in [
            ("blacklist_topic_bias", self.blacklist_topic_bias),
            ("common_fraction", self.common_fraction),
            ("sensitive_leak", self.sensitive_leak),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        for t in &self.topics {
            if t.vocabulary.is_empty() {
                return bad(format!("topic {} has no vocabulary", t.name));
            }
        }
        for w in self
            .topics
            .iter()
            .flat_map(|t| &t.vocabulary)
            .chain(&self.common_words)
        {
            if w.len() < 2 || !w.bytes().all(|b| b.is_ascii_lowercase()) {
                return bad(format!("vocabulary word {w:?} is not [a-z]{{2,}}"));
            }
        }
        if !self.topics.iter().any(|t| !t.sensitive) {
            return bad("need at least one benign topic".into());
        }
        if self.common_fraction > 0.0 && self.common_words.is_empty() {
            return bad("common_fraction set without common_words".into());
        }
        let n_black = if self.blacklist.is_empty() {
            self.blacklist_count
        } else {
            self.blacklist.len()
        };
        if n_black > self.num_domains {
            return bad(format!("{n_black} blacklisted of {} domains", self.num_domains));
        }
        if (n_black > 0 || self.sensitive_leak > 0.0) && !self.topics.iter().any(|t| t.sensitive) {
            return bad("blacklist requires at least one sensitive topic".into());
        }
        Ok(())
    }

    pub fn domain_name(&self, i: usize) -> String {
        format!(
            "{}{:02}.{}",
            DOMAIN_STEMS[i % DOMAIN_STEMS.len()],
            i,
            self.domain_suffix
        )
    }
}

/// One document as read back from a corpus directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusDocument {
    pub url: String,
    pub domain: String,
    pub path: PathBuf,
    pub html: Vec<u8>,
}

/// Reads `<dir>/<domain>/<file>` documents as `http://<domain>/<file>`,
/// sorted by URL.
pub fn read_corpus(dir: &Path) -> Result<Vec<CorpusDocument>, SimError> {
    let mut docs = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let domain_path = entry.path();
        if !domain_path.is_dir() {
            continue;
        }
        let domain = entry.file_name().to_string_lossy().to_ascii_lowercase();
        collect_files(&domain_path, &domain_path, &domain, &mut docs)?;
    }
    docs.sort_by(|a, b| a.url.cmp(&b.url));
    Ok(docs)
}

fn collect_files(
    root: &Path,
    dir: &Path,
    domain: &str,
    out: &mut Vec<CorpusDocument>,
) -> Result<(), SimError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_files(root, &path, domain, out)?;
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .expect("walked below root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let html = fs::read(&path).map_err(io_err(&path))?;
        out.push(CorpusDocument {
            url: format!("http://{domain}/{rel}"),
            domain: domain.to_string(),
            path,
            html,
        });
    }
    Ok(())
}

struct TopicSampler<'a> {
    vocab: Vec<&'a str>,
    zipf: Zipf<f64>,
}

impl<'a> TopicSampler<'a> {
    fn new(words: &'a [String], rng: &mut ChaCha8Rng) -> Self {
        let mut vocab: Vec<&str> = words.iter().map(String::as_str).collect();
        vocab.shuffle(rng);
        let zipf = Zipf::new(vocab.len() as u64, ZIPF_EXPONENT).expect("non-empty vocabulary");
        Self { vocab, zipf }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &'a str {
        let k = self.zipf.sample(rng) as usize;
        self.vocab[k.clamp(1, self.vocab.len()) - 1]
    }
}

fn render_html(domain: &str, slug: &str, tokens: &[&str], rng: &mut ChaCha8Rng) -> String {
    let title: Vec<String> = tokens.iter().take(4).map(|t| capitalize(t)).collect();
    let title = title.join(" ");
    let mut body = String::new();
    let mut rest = tokens;
    while !rest.is_empty() {
        let n = rng.gen_range(12..=20).min(rest.len());
        let (para, tail) = rest.split_at(n);
        rest = tail;
        let mut sentence = para.join(" ");
        if let Some(first) = sentence.get(..1) {
            sentence.replace_range(..1, &first.to_ascii_uppercase());
        }
        body.push_str(&format!("<p>{sentence}.</p>\n"));
    }
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>{title}</title>\n\
         <style>body{{font-family:Georgia,serif;max-width:42em}} .byline{{color:#777}}</style>\n\
         <script>var analyticsQueue=[];function trackPageView(id){{analyticsQueue.push(id);}}</script>\n\
         </head>\n<body>\n<!-- layout v3 rendered for {domain} -->\n<h1>{title}</h1>\n{body}\
         <script type=\"text/javascript\">trackPageView(\"{slug}\");</script>\n</body>\n</html>\n"
    )
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

/// Writes the world to `out_dir` and returns its manifest.
pub fn generate_world(spec: &WorldSpec, out_dir: &Path, force: bool) -> Result<Manifest, SimError> {
    spec.validate()?;
    if out_dir.exists() {
        let non_empty = fs::read_dir(out_dir)
            .map_err(io_err(out_dir))?
            .next()
            .is_some();
        if non_empty {
            if !force {
                return Err(SimError::OutputNotEmpty(out_dir.display().to_string()));
            }
            fs::remove_dir_all(out_dir).map_err(io_err(out_dir))?;
        }
    }
    let corpus_dir = out_dir.join(CORPUS_DIR);
    fs::create_dir_all(&corpus_dir).map_err(io_err(&corpus_dir))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let names: Vec<String> = (0..spec.num_domains).map(|i| spec.domain_name(i)).collect();
    let blacklist: BTreeSet<String> = if spec.blacklist.is_empty() {
        let mut idx: Vec<usize> = (0..spec.num_domains).collect();
        idx.shuffle(&mut rng);
        idx[..spec.blacklist_count]
            .iter()
            .map(|&i| names[i].clone())
            .collect()
    } else {
        for b in &spec.blacklist {
            if !names.contains(b) {
                return Err(SimError::InvalidSpec(format!(
                    "blacklisted domain {b} is not generated (names look like {})",
                    names[0]
                )));
            }
        }
        spec.blacklist.iter().cloned().collect()
    };

    let sensitive: Vec<&Topic> = spec.topics.iter().filter(|t| t.sensitive).collect();
    let benign: Vec<&Topic> = spec.topics.iter().filter(|t| !t.sensitive).collect();

    let mut domains = Vec::with_capacity(spec.num_domains);
    let mut token_docs: Vec<Vec<String>> = Vec::new();
    let mut black_seen = 0usize;
    for (i, name) in names.iter().enumerate() {
        let is_black = blacklist.contains(name);
        let home = benign[i % benign.len()];
        let primary = if is_black {
            black_seen += 1;
            Some(sensitive[(black_seen - 1) % sensitive.len()])
        } else {
            None
        };
        let home_sampler = TopicSampler::new(&home.vocabulary, &mut rng);
        let sensitive_samplers: Vec<TopicSampler> = sensitive
            .iter()
            .map(|t| TopicSampler::new(&t.vocabulary, &mut rng))
            .collect();
        let primary_idx = primary.map(|p| {
            sensitive
                .iter()
                .position(|t| t.name == p.name)
                .expect("primary is sensitive")
        });
        let common_sampler = (!spec.common_words.is_empty())
            .then(|| TopicSampler::new(&spec.common_words, &mut rng));

        let domain_dir = corpus_dir.join(name);
        fs::create_dir_all(&domain_dir).map_err(io_err(&domain_dir))?;
        let n_docs = rng.gen_range(spec.docs_per_domain[0]..=spec.docs_per_domain[1]);
        let mut urls = Vec::with_capacity(n_docs);
        for j in 0..n_docs {
            let n = rng.gen_range(spec.tokens_per_doc[0]..=spec.tokens_per_doc[1]);
            let n_sensitive = if is_black {
                (spec.blacklist_topic_bias * n as f64).ceil() as usize
            } else {
                0
            };
            let mut tokens: Vec<&str> = Vec::with_capacity(n);
            for _ in 0..n_sensitive {
                let pick = match primary_idx {
                    Some(p) if rng.gen_bool(0.75) => p,
                    _ => rng.gen_range(0..sensitive_samplers.len()),
                };
                tokens.push(sensitive_samplers[pick].draw(&mut rng));
            }
            for _ in n_sensitive..n {
                let tok = if !is_black
                    && !sensitive_samplers.is_empty()
                    && rng.gen_bool(spec.sensitive_leak)
                {
                    let pick = rng.gen_range(0..sensitive_samplers.len());
                    sensitive_samplers[pick].draw(&mut rng)
                } else if let Some(cs) = common_sampler
                    .as_ref()
                    .filter(|_| rng.gen_bool(spec.common_fraction))
                {
                    cs.draw(&mut rng)
                } else {
                    home_sampler.draw(&mut rng)
                };
                tokens.push(tok);
            }
            tokens.shuffle(&mut rng);
            let slug = format!("article-{j:03}.html");
            let html = render_html(name, &slug, &tokens, &mut rng);
            let path = domain_dir.join(&slug);
            fs::write(&path, &html).map_err(io_err(&path))?;
            token_docs.push(textproc::strip_html(html.as_bytes(), None).tokens);
            urls.push(format!("http://{name}/{slug}"));
        }
        domains.push(DomainEntry {
            name: name.clone(),
            blacklisted: is_black,
            home_topic: home.name.clone(),
            sensitive_topic: primary.map(|p| p.name.clone()),
            urls,
        });
    }

    let model = CorpusModel::from_documents(
        token_docs.iter().map(Vec::as_slice),
        Default::default(),
    )
    .map_err(SimError::InvalidSpec)?;
    let bg = out_dir.join(BACKGROUND_FILE);
    fs::write(&bg, model.frequency_table()).map_err(io_err(&bg))?;
    let sw = out_dir.join(STOPWORDS_FILE);
    let stop: String = spec.common_words.iter().map(|w| format!("{w}\n")).collect();
    fs::write(&sw, stop).map_err(io_err(&sw))?;

    let manifest = Manifest {
        spec: spec.clone(),
        domains,
        blacklist: blacklist.into_iter().collect(),
        document_count: token_docs.len(),
    };
    let mp = out_dir.join(MANIFEST_FILE);
    fs::write(&mp, serde_json::to_vec_pretty(&manifest)?).map_err(io_err(&mp))?;
    Ok(manifest)
}
