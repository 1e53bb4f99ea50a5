//! Seeded generators and independent reference implementations shared by the
//! property tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;

use msgen_core::contract::{
    ContractDelta, ContractState, DeltaAction, Severity, ValidationRule, VisualArtifact,
};
use msgen_core::pipeline::{Manuscript, ManuscriptSection, SectionSpec};
use msgen_core::render::{FloatKind, ScannedDocument};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<'a, R: Rng, T>(rng: &mut R, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty choice")
}

// ---------------------------------------------------------------------------
// Validator cases: a contract plus a two-section document, and the violations
// predicted from the generator's own model of that document.

pub const ARTIFACT_POOL: [&str; 8] = ["fig:a", "fig:b", "fig:c", "fig:d", "tab:a", "tab:b", "tab:c", "tab:d"];
const SECTIONS: [&str; 2] = ["main", "other"];

#[derive(Debug, Clone)]
pub enum Item {
    Float(String),
    BareLabel(String),
    Ref(String),
}

#[derive(Debug, Clone)]
pub struct ValidatorCase {
    pub registry: Vec<String>,
    /// (section, label) obligations.
    pub obligations: Vec<(String, String)>,
    /// Items per section, in document order.
    pub items: [Vec<Item>; 2],
}

impl ValidatorCase {
    /// Half the cases start from a valid placement of a small registry and
    /// perturb it at most once; the rest are fully random.
    pub fn generate<R: Rng>(rng: &mut R) -> Self {
        let near_clean = rng.random_bool(0.5);
        let registry: Vec<String> = if near_clean {
            let k = rng.random_range(0..=3);
            ARTIFACT_POOL.choose_multiple(rng, k).map(|s| s.to_string()).collect()
        } else {
            ARTIFACT_POOL.iter().filter(|_| rng.random_bool(0.5)).map(|s| s.to_string()).collect()
        };
        let mut obligations = Vec::new();
        for l in &registry {
            if near_clean || rng.random_bool(0.5) {
                obligations.push((pick(rng, &SECTIONS).to_string(), l.clone()));
            }
        }
        let mut ref_pool: Vec<&str> = ARTIFACT_POOL.to_vec();
        ref_pool.extend(["sec:main", "sec:other", "fig:zz", "eq:one"]);
        let random_item = |rng: &mut R| match rng.random_range(0..3) {
            0 => Item::Float(pick(rng, &ARTIFACT_POOL).to_string()),
            1 => Item::BareLabel(pick(rng, &ARTIFACT_POOL).to_string()),
            _ => Item::Ref(pick(rng, &ref_pool).to_string()),
        };
        // Two section labels are always present, so at most 8 labels and refs in total.
        let budget = 6;
        let mut items: [Vec<Item>; 2] = [Vec::new(), Vec::new()];
        if near_clean {
            for (section, l) in &obligations {
                let idx = SECTIONS.iter().position(|s| s == section).unwrap();
                items[idx].push(Item::Float(l.clone()));
                items[idx].push(Item::Ref(l.clone()));
            }
            if items[0].len() + items[1].len() < budget && rng.random_bool(0.5) {
                let item = random_item(rng);
                items[rng.random_range(0..2)].push(item);
            }
        } else {
            for _ in 0..rng.random_range(0..=budget) {
                let item = random_item(rng);
                items[rng.random_range(0..2)].push(item);
            }
        }
        Self { registry, obligations, items }
    }

    pub fn contract(&self) -> ContractState {
        let mut c = ContractState::new();
        for l in &self.registry {
            let artifact = if l.starts_with("fig:") {
                VisualArtifact::figure(l, "A figure.", &SECTIONS)
            } else {
                VisualArtifact::table(l, "A table.", &SECTIONS, &["k", "v"], &[&["a", "1.5"]])
            };
            c = c.register_artifact(artifact).unwrap();
        }
        for (s, l) in &self.obligations {
            c = c.bind_obligation(s, l).unwrap();
        }
        c
    }

    pub fn latex(&self) -> String {
        let mut out = String::from("\\begin{document}\n");
        for (section, items) in SECTIONS.iter().zip(&self.items) {
            out.push_str(&format!("\n\\section{{{section}}}\\label{{sec:{section}}}\n"));
            for item in items {
                match item {
                    Item::Float(l) => {
                        let env = if l.starts_with("fig:") { "figure" } else { "table" };
                        out.push_str(&format!("\n\\begin{{{env}}}\n\\caption{{c}}\n\\label{{{l}}}\n\\end{{{env}}}\n"));
                    }
                    Item::BareLabel(l) => out.push_str(&format!("\nAn anchor \\label{{{l}}} sits here.\n")),
                    Item::Ref(l) => out.push_str(&format!("\nSee \\ref{{{l}}} for details.\n")),
                }
            }
        }
        out.push_str("\n\\end{document}\n");
        out
    }

    /// Sorted `(rule, subject)` pairs by plain set difference over the model.
    pub fn oracle(&self) -> Vec<(String, String)> {
        let mut defined: BTreeMap<String, usize> = SECTIONS.iter().map(|s| (format!("sec:{s}"), 1)).collect();
        let mut placed: BTreeMap<String, usize> = BTreeMap::new();
        for item in self.items.iter().flatten() {
            match item {
                Item::Float(l) => {
                    *defined.entry(l.clone()).or_default() += 1;
                    *placed.entry(l.clone()).or_default() += 1;
                }
                Item::BareLabel(l) => *defined.entry(l.clone()).or_default() += 1,
                Item::Ref(_) => {}
            }
        }
        let mut out = Vec::new();
        for (l, n) in &defined {
            if *n > 1 {
                out.push(("label_unique".to_string(), l.clone()));
            }
        }
        for item in self.items.iter().flatten() {
            if let Item::Ref(r) = item {
                let artifact_like = r.starts_with("fig:") || r.starts_with("tab:");
                if !defined.contains_key(r) || (artifact_like && !self.registry.contains(r)) {
                    out.push(("ref_resolves".to_string(), r.clone()));
                }
            }
        }
        for (l, n) in &placed {
            if *n > 1 {
                out.push(("artifact_placed_once".to_string(), l.clone()));
            }
        }
        for l in &self.registry {
            if !placed.contains_key(l) {
                out.push(("artifact_placed_once".to_string(), l.clone()));
            }
        }
        for (s, l) in &self.obligations {
            let idx = SECTIONS.iter().position(|x| x == s).unwrap();
            let referenced = self.items[idx].iter().any(|i| matches!(i, Item::Ref(r) if r == l));
            if !referenced {
                out.push(("artifact_placed_once".to_string(), l.clone()));
            }
        }
        out.sort();
        out
    }
}

// ---------------------------------------------------------------------------
// Contract delta sequences.

pub const CONTRACT_SECTIONS: [&str; 4] = ["intro", "method", "results", "discussion"];

pub fn base_contract<R: Rng>(rng: &mut R) -> ContractState {
    let order = CONTRACT_SECTIONS.iter().map(|s| s.to_string()).collect();
    let rule = DeltaAction::AddRule { rule: ValidationRule::section_order(order, Severity::Error) };
    let mut c = ContractState::new().apply_deltas(&[ContractDelta::new(rule, "architect")]).unwrap();
    let n = rng.random_range(1..=6);
    for i in 0..n {
        let section = *pick(rng, &CONTRACT_SECTIONS);
        let artifact = if rng.random_bool(0.5) {
            VisualArtifact::figure(&format!("fig:f{i}"), "Figure.", &[section])
        } else {
            VisualArtifact::table(&format!("tab:t{i}"), "Table.", &[section], &["x"], &[&["1"]])
        };
        c = c.register_artifact(artifact).unwrap();
        if rng.random_bool(0.6) {
            let label = c.registry().keys().last().unwrap().clone();
            c = c.bind_obligation(section, &label).unwrap();
        }
    }
    c
}

/// A feedback set whose targets all exist in `c`.
pub fn random_deltas<R: Rng>(rng: &mut R, c: &ContractState) -> Vec<ContractDelta> {
    let labels: Vec<String> = c.registry().keys().cloned().collect();
    let origins = ["visual_consistency", "structure", "refiner"];
    let n = rng.random_range(0..=6);
    (0..n)
        .map(|_| {
            let label = pick(rng, &labels).clone();
            let section = pick(rng, &CONTRACT_SECTIONS).to_string();
            let action = match rng.random_range(0..5) {
                0 => DeltaAction::RequireExplanation { label },
                1 => DeltaAction::AddObligation { section, label },
                2 => DeltaAction::AdjustPlacement { label, section },
                3 => DeltaAction::AddRule { rule: ValidationRule::artifact_explained(label, Severity::Warning) },
                _ => {
                    let mut order: Vec<String> = CONTRACT_SECTIONS.iter().map(|s| s.to_string()).collect();
                    if rng.random_bool(0.5) {
                        order.reverse();
                    }
                    DeltaAction::AddRule { rule: ValidationRule::section_order(order, Severity::Error) }
                }
            };
            ContractDelta::new(action, *pick(rng, &origins))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Manuscripts for the emit/scan round trip.

pub struct RenderCase {
    pub manuscript: Manuscript,
    pub contract: ContractState,
    /// Label left without any marker, when one was dropped.
    pub dropped: Option<String>,
}

pub fn render_case<R: Rng>(rng: &mut R, max_artifacts: usize, drop_one: bool) -> RenderCase {
    let n_sections = rng.random_range(1..=4);
    let sections: Vec<String> = (0..n_sections).map(|i| format!("s{i}")).collect();
    let n_artifacts = rng.random_range(usize::from(drop_one)..=max_artifacts);
    let mut c = ContractState::new();
    c = c.add_citation("smith2020").unwrap();
    let mut placement: Vec<(String, usize)> = Vec::new();
    for i in 0..n_artifacts {
        let s = rng.random_range(0..n_sections);
        let label = if rng.random_bool(0.5) { format!("fig:g{i}") } else { format!("tab:g{i}") };
        let artifact = if label.starts_with("fig:") {
            VisualArtifact::figure(&label, &format!("Figure {i} & friends_{i}."), &[&sections[s]])
        } else {
            VisualArtifact::table(&label, "Numbers 50% of the time.", &[&sections[s]], &["a", "b"], &[&["1", "x_y"]])
        };
        c = c.register_artifact(artifact).unwrap();
        c = c.bind_obligation(&sections[s], &label).unwrap();
        placement.push((label, s));
    }
    let dropped = (drop_one && !placement.is_empty())
        .then(|| placement[rng.random_range(0..placement.len())].0.clone());
    let mut texts: Vec<Vec<String>> = vec![Vec::new(); n_sections];
    for (i, t) in texts.iter_mut().enumerate() {
        t.push(format!("Opening words for part {i} cite [[CITE:smith2020]] and carry on."));
    }
    for (label, s) in &placement {
        if Some(label) == dropped.as_ref() {
            continue;
        }
        let token = if label.starts_with("fig:") { "FIG" } else { "TAB" };
        for _ in 0..rng.random_range(1..=3) {
            texts[*s].push(format!("As [[{token}:{label}]] shows, the effect holds across runs."));
        }
    }
    let manuscript = Manuscript {
        title: "Generated & tested".into(),
        sections: sections
            .iter()
            .enumerate()
            .map(|(i, id)| ManuscriptSection {
                spec: SectionSpec {
                    section_id: id.clone(),
                    title: format!("Part {i}"),
                    order_index: i,
                    outline: vec![],
                    evidence_links: vec![],
                    bound_artifacts: vec![],
                    required_citations: vec![],
                },
                text: texts[i].join("\n\n"),
            })
            .collect(),
        contract_version_at_freeze: c.version(),
        rendered: None,
    };
    RenderCase { manuscript, contract: c, dropped }
}

// ---------------------------------------------------------------------------
// LaTeX-subset fuzz inputs and a naive character-walk reference scanner.

/// Offsets of float `\begin`/`\end` tokens in a generated input.
#[derive(Debug, Clone)]
pub struct EnvTag {
    pub start: usize,
    pub len: usize,
    pub figure: bool,
    pub begin: bool,
}

pub struct FuzzDoc {
    pub text: String,
    pub tags: Vec<EnvTag>,
}

const IDENTS: [&str; 6] = ["fig:a", "tab:b", "sec:intro", "eq_1", "fig:a", "x"];
const WORDS: [&str; 9] = ["alpha", "beta", "Gamma", "δelta", "x1", "  ", "\n", "\n\n", " \t\n  \n"];

fn fuzz_fragment<R: Rng>(rng: &mut R, doc: &mut FuzzDoc, depth: usize) {
    let t = &mut doc.text;
    match rng.random_range(0..16) {
        0..=3 => t.push_str(pick(rng, &WORDS)),
        4 => t.push_str(&format!("\\section{{Title {}}}", rng.random_range(0..9))),
        5 => t.push_str(&format!("\\label{{{}}}", pick(rng, &IDENTS))),
        6 => t.push_str(&format!("\\ref{{{}}}", pick(rng, &IDENTS))),
        7 => t.push_str(&format!("\\ref {{{}}}", pick(rng, &IDENTS))),
        8 => t.push_str(pick(rng, &["\\cite{k1,k2}", "\\cite{ k1 , ,k3}", "\\cite{solo}"])),
        9 => t.push_str("\\caption{Some caption words}"),
        10 => t.push_str(pick(rng, &["\\emph{word}", "\\maketitle", "\\%", "\\\\", "\\&"])),
        11 => t.push_str("% hidden \\ref{gone} \\begin{figure}\n"),
        12 => t.push_str("\\begin{itemize} item \\end{itemize}"),
        _ if depth < 2 => {
            let figure = rng.random_bool(0.5);
            let env = if figure { "figure" } else { "table" };
            let begin = format!("\\begin{{{env}}}");
            doc.tags.push(EnvTag { start: t.len(), len: begin.len(), figure, begin: true });
            t.push_str(&begin);
            for _ in 0..rng.random_range(0..5) {
                fuzz_fragment(rng, doc, depth + 1);
            }
            let end = format!("\\end{{{env}}}");
            doc.tags.push(EnvTag { start: doc.text.len(), len: end.len(), figure, begin: false });
            doc.text.push_str(&end);
        }
        _ => t.push(' '),
    }
}

pub fn fuzz_doc<R: Rng>(rng: &mut R) -> FuzzDoc {
    let mut doc = FuzzDoc { text: String::new(), tags: Vec::new() };
    for _ in 0..rng.random_range(0..40) {
        fuzz_fragment(rng, &mut doc, 0);
    }
    doc
}

/// Break the balance of one float environment, or `None` if there is none.
pub fn unbalance<R: Rng>(rng: &mut R, doc: &FuzzDoc) -> Option<String> {
    let tag = doc.tags.choose(rng)?;
    let mut text = doc.text.clone();
    let range = tag.start..tag.start + tag.len;
    match (tag.begin, rng.random_bool(0.5)) {
        (false, true) => {
            let swapped = if tag.figure { "\\end{table}" } else { "\\end{figure}" };
            text.replace_range(range, swapped);
        }
        _ => text.replace_range(range, ""),
    }
    Some(text)
}

/// What a scan is compared on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Walked {
    pub labels: Vec<String>,
    pub refs: Vec<String>,
    pub cites: Vec<String>,
    /// (environment name, first label) per float in `\begin` order.
    pub floats: Vec<(String, Option<String>)>,
    /// (title, label directly after the heading) per section.
    pub sections: Vec<(String, Option<String>)>,
}

impl Walked {
    pub fn from_scan(doc: &ScannedDocument) -> Self {
        Self {
            labels: doc.labels.iter().map(|l| l.label.clone()).collect(),
            refs: doc.refs.iter().map(|l| l.label.clone()).collect(),
            cites: doc.cites.iter().map(|c| c.key.clone()).collect(),
            floats: doc
                .environments
                .iter()
                .map(|e| {
                    let name = match e.kind {
                        FloatKind::Figure => "figure",
                        FloatKind::Table => "table",
                    };
                    (name.to_string(), e.label.clone())
                })
                .collect(),
            sections: doc.sections.iter().map(|s| (s.title.clone(), s.label.clone())).collect(),
        }
    }
}

/// Reference scanner: walks characters one at a time with an explicit
/// environment stack. Returns `Err` on any float imbalance.
pub fn walk(text: &str) -> Result<Walked, ()> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Walked::default();
    let mut stack: Vec<(String, usize)> = Vec::new();
    let mut heading_open = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c != '\\' {
            if !c.is_whitespace() {
                heading_open = false;
            }
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && chars[j].is_ascii_alphabetic() {
            j += 1;
        }
        let name: String = chars[i + 1..j].iter().collect();
        if name.is_empty() {
            heading_open = false;
            i = (i + 2).min(chars.len());
            continue;
        }
        let known = ["section", "label", "ref", "cite", "caption", "begin", "end"].contains(&name.as_str());
        if !known || chars.get(j) != Some(&'{') {
            heading_open = false;
            i = j;
            continue;
        }
        let close = (j + 1..chars.len()).find(|&k| chars[k] == '}').ok_or(())?;
        let arg: String = chars[j + 1..close].iter().collect();
        let arg = arg.trim().to_string();
        i = close + 1;
        let float = arg == "figure" || arg == "table";
        match name.as_str() {
            "section" => {
                out.sections.push((arg, None));
                heading_open = true;
                continue;
            }
            "label" => {
                out.labels.push(arg.clone());
                if let Some((_, idx)) = stack.last() {
                    if out.floats[*idx].1.is_none() {
                        out.floats[*idx].1 = Some(arg.clone());
                    }
                }
                if heading_open {
                    out.sections.last_mut().unwrap().1 = Some(arg);
                }
            }
            "ref" => out.refs.push(arg),
            "cite" => out.cites.extend(arg.split(',').map(str::trim).filter(|k| !k.is_empty()).map(String::from)),
            "begin" if float => {
                stack.push((arg.clone(), out.floats.len()));
                out.floats.push((arg, None));
            }
            "end" if float => match stack.pop() {
                Some((open, _)) if open == arg => {}
                _ => return Err(()),
            },
            _ => {}
        }
        heading_open = false;
    }
    if stack.is_empty() {
        Ok(out)
    } else {
        Err(())
    }
}
