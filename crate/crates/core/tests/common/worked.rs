//! Worked stage replies in English and Japanese, with the typed structures
//! they must parse to. The source opinions were not published, so
//! `synthetic_text` builds a stand-in opinion that contains every leaf.

use narrative_forge::extract::{
    Antecedent, Causal, Claim, ClaimKind, Influence, Pattern, PerceivedObject, Perception,
    ReplacementList,
};

pub const STAGE1_EN: &str = "\u{201c}Replacement of Demonstrative Pronouns\u{201d}:

\u{201c}Here = \u{2018}Concerns of those working in jobs equivalent to image creators\u{2019}\u{201d}

\u{201c}Edge List\u{201d}:

Pattern 3: (Generative AI, Creators and Performers, Causing concerns)

Pattern 3: (Excessive AI regulation, Creators, Posing a risk of significantly diminishing the benefits of AI technology)

Pattern 4: (Author, (Generative AI, Creators and Performers, Causing concerns), Perceives it as concerns regarding various issues)

Pattern 4: (Author, (Excessive AI regulation, Creators, Posing a risk of significantly diminishing the benefits of AI technology), Perceives it as excessive regulation)

Pattern 3: (Rising prices and declining birthrate, Around creators, Causing a shortage of human resources)
";

pub const STAGE1_JA: &str = "\"指示語の置き換え\": [

\"「ここでは」 = 「画像系のクリエイターに相当する仕事をしている者の懸念点」\",

\"エッジリスト\": [

\"Pattern3 (生成 AI, クリエイターや実演家, 懸念点を引き起こしている)\",

\"Pattern3 (過度の AI 規制, クリエイター, AI 技術のメリットを大きく損なう危険性を引き起こしている)\",

\"Pattern4 (筆者, (生成 AI, クリエイターや実演家, 懸念点を引き起こしている), 諸問題に対する懸念として捉えている)\",

\"Pattern4 (筆者, (過度の AI 規制, クリエイター, AI 技術のメリットを大きく損なう危険性を引き起こしている), 過度の規制として捉えている)\",

\"Pattern3 (物価高・少子化, クリエイター周辺, 人的リソースの不足を引き起こしている)\"]
";

pub const STAGE2_EN: &str = "\u{201c}Replacement of Demonstrative Pronouns\u{201d}:

\u{201c}This possibility\u{201d} = \u{201c}The possibility of increased productivity through generative AI\u{201d}

\u{201c}That opportunity\u{201d} = \u{201c}The opportunity for increased productivity through generative AI\u{201d}

\u{201c}Edge List\u{201d}:

Pattern 5: (Author, (Prices, Creators\u{2019} compensation, Causing a situation where compensation becomes relatively lower), (Staff and workload management, Being required to maintain the quality of outputs))

Pattern 5: (Author, (Stagnation of generative AI technology as a whole, Domestic cultural activities, Causing a significant setback), (Creators and society as a whole, Wanting to move forward while balancing the protection of individual rights and the development of AI technology))
";

pub const STAGE2_JA: &str = "\"指示語の置き換え\": [

\"「この可能性」 = 「生成 AI による生産力向上の可能性」\",

\"「その機会」 = 「生成 AI による生産力向上の機会」\",

\"エッジリスト\": [

\"Pattern5 (筆者, (物価, クリエイターの報酬, 相対的に低くなる状況を引き起こしている), (スタッフと工数の管理, 成果物の品質維持を求められる))\",

\"Pattern5 (筆者, (生成 AI 技術全体の停滞, 本国の文化活動, 大きな後退を引き起こす状況を引き起こしている), (クリエイターと社会全体, 個々人の権利保護と AI 技術の発展のバランスを取りつつ前進して欲しい))\"]
";

pub const SUMMARY_NORMATIVE: &str = "type: Normative Claim
A: The State of Image Generation AI Without Requiring Permission
B: It significantly undermines the equality of benefits and opportunities for creators, copyright holders, and authors.
C: A State Where Image-Generating AI Does Not Require Permission
D: Non-Acceptance
E: NA
F: NA
";

pub const SUMMARY_REQUEST: &str = "type: Request or Demand
A: Generative AI
B: Economic Decline in Japan
C: NA
D: NA
E: Japanese Government
F: Help Japan
";

fn causal(cause: &str, target: &str, situation: &str) -> Causal {
    Causal {
        cause: cause.into(),
        target: target.into(),
        situation: situation.into(),
    }
}

fn perceives(who: &str, object: Causal, how: &str) -> Pattern {
    Pattern::P4(Perception {
        who: who.into(),
        object: PerceivedObject::Causal(object),
        perception: how.into(),
    })
}

fn influence(who: &str, antecedent: Causal, target: &str, state: &str) -> Pattern {
    Pattern::P5(Influence {
        who: who.into(),
        antecedent: Antecedent::Causal(antecedent),
        consequent: Claim {
            kind: ClaimKind::Unresolved,
            who: None,
            target: target.into(),
            state: state.into(),
        },
    })
}

fn replacements(entries: &[(&str, &str)]) -> ReplacementList {
    ReplacementList {
        entries: entries.iter().map(|(p, r)| (p.to_string(), r.to_string())).collect(),
    }
}

pub fn stage1_en() -> (ReplacementList, Vec<Pattern>) {
    let a = causal("Generative AI", "Creators and Performers", "Causing concerns");
    let b = causal(
        "Excessive AI regulation",
        "Creators",
        "Posing a risk of significantly diminishing the benefits of AI technology",
    );
    (
        replacements(&[("Here", "Concerns of those working in jobs equivalent to image creators")]),
        vec![
            Pattern::P3(a.clone()),
            Pattern::P3(b.clone()),
            perceives("Author", a, "Perceives it as concerns regarding various issues"),
            perceives("Author", b, "Perceives it as excessive regulation"),
            Pattern::P3(causal(
                "Rising prices and declining birthrate",
                "Around creators",
                "Causing a shortage of human resources",
            )),
        ],
    )
}

pub fn stage1_ja() -> (ReplacementList, Vec<Pattern>) {
    let a = causal("生成 AI", "クリエイターや実演家", "懸念点を引き起こしている");
    let b = causal(
        "過度の AI 規制",
        "クリエイター",
        "AI 技術のメリットを大きく損なう危険性を引き起こしている",
    );
    (
        replacements(&[("ここでは", "画像系のクリエイターに相当する仕事をしている者の懸念点")]),
        vec![
            Pattern::P3(a.clone()),
            Pattern::P3(b.clone()),
            perceives("筆者", a, "諸問題に対する懸念として捉えている"),
            perceives("筆者", b, "過度の規制として捉えている"),
            Pattern::P3(causal("物価高・少子化", "クリエイター周辺", "人的リソースの不足を引き起こしている")),
        ],
    )
}

pub fn stage2_en() -> (ReplacementList, Vec<Pattern>) {
    (
        replacements(&[
            ("This possibility", "The possibility of increased productivity through generative AI"),
            ("That opportunity", "The opportunity for increased productivity through generative AI"),
        ]),
        vec![
            influence(
                "Author",
                causal(
                    "Prices",
                    "Creators\u{2019} compensation",
                    "Causing a situation where compensation becomes relatively lower",
                ),
                "Staff and workload management",
                "Being required to maintain the quality of outputs",
            ),
            influence(
                "Author",
                causal(
                    "Stagnation of generative AI technology as a whole",
                    "Domestic cultural activities",
                    "Causing a significant setback",
                ),
                "Creators and society as a whole",
                "Wanting to move forward while balancing the protection of individual rights and the development of AI technology",
            ),
        ],
    )
}

pub fn stage2_ja() -> (ReplacementList, Vec<Pattern>) {
    (
        replacements(&[
            ("この可能性", "生成 AI による生産力向上の可能性"),
            ("その機会", "生成 AI による生産力向上の機会"),
        ]),
        vec![
            influence(
                "筆者",
                causal("物価", "クリエイターの報酬", "相対的に低くなる状況を引き起こしている"),
                "スタッフと工数の管理",
                "成果物の品質維持を求められる",
            ),
            influence(
                "筆者",
                causal("生成 AI 技術全体の停滞", "本国の文化活動", "大きな後退を引き起こす状況を引き起こしている"),
                "クリエイターと社会全体",
                "個々人の権利保護と AI 技術の発展のバランスを取りつつ前進して欲しい",
            ),
        ],
    )
}

/// One sentence per edge holding its non-exempt leaves, plus one sentence
/// per replacement referent.
pub fn synthetic_text(edges: &[Pattern], list: &ReplacementList, japanese: bool) -> String {
    let (join, stop) = if japanese { ("、そして", "。") } else { (" and ", ". ") };
    let exempt = |s: &str| s.eq_ignore_ascii_case("author") || s == "筆者";
    let mut out = String::new();
    for edge in edges {
        let leaves: Vec<&str> = edge.leaves().into_iter().filter(|l| !exempt(l)).collect();
        out.push_str(&leaves.join(join));
        out.push_str(stop);
    }
    for (_, referent) in &list.entries {
        out.push_str(referent);
        out.push_str(stop);
    }
    out
}

/// Stage-1 claims the stage-2 consequents answer, so the stage-2 reply is
/// anchored.
pub fn anchoring_claims(edges: &[Pattern]) -> Vec<Pattern> {
    edges
        .iter()
        .filter_map(|e| match e {
            Pattern::P5(inf) => Some(Pattern::P1(narrative_forge::extract::Normative {
                who: inf.who.clone(),
                about: inf.consequent.target.clone(),
                state: inf.consequent.state.clone(),
            })),
            _ => None,
        })
        .collect()
}
