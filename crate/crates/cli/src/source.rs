//! Parsing of model, machine, specification and policy arguments.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rlspec::io::{machine_from_json, mdp_from_json};
use rlspec::mdp::{Discount, Mdp, PositionalPolicy};
use rlspec::refute::{canonical_reach_rm, fig1_mdp, fig3_mdp, fig4_mdp};
use rlspec::spec::{build_reach_arm, build_safe_arm, parse_ltl, Machine, Specification};

pub fn read(path: &str) -> Result<String> {
    std::fs::read_to_string(Path::new(path)).with_context(|| format!("cannot read {path}"))
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("`{x}` is not a number")))
        .collect()
}

/// `fig1:p1,p2,p3`, `fig3:p1,p2`, `fig4:p1,p2`, or a path to MDP JSON.
pub fn mdp(source: &str) -> Result<Mdp<f64>> {
    if let Some((name, params)) = source.split_once(':') {
        let p = numbers(params);
        match (name, p) {
            ("fig1", Ok(p)) if p.len() == 3 => return Ok(fig1_mdp(p[0], p[1], p[2])?),
            ("fig3", Ok(p)) if p.len() == 2 => return Ok(fig3_mdp(p[0], p[1])?),
            ("fig4", Ok(p)) if p.len() == 2 => return Ok(fig4_mdp(p[0], p[1])?),
            ("fig1" | "fig3" | "fig4", _) => bail!("wrong parameters for {name}: `{params}`"),
            _ => {}
        }
    }
    Ok(mdp_from_json(&read(source)?)?)
}

/// `builtin:reach:<props>`, `builtin:safe:<props>`, `builtin:entering-b`
/// (reward 1 on entering `s1` of the reachability figure), or a path to
/// machine JSON.
pub fn machine(source: &str) -> Result<Machine<f64>> {
    if let Some(rest) = source.strip_prefix("builtin:") {
        let (kind, props) = rest.split_once(':').unwrap_or((rest, ""));
        let props: Vec<&str> = props.split(',').filter(|p| !p.is_empty()).collect();
        return Ok(match kind {
            "reach" => build_reach_arm::<f64, _>(&props)?.into(),
            "safe" => build_safe_arm::<f64, _>(&props)?.into(),
            "entering-b" => canonical_reach_rm().into(),
            other => bail!("unknown built-in machine `{other}`"),
        });
    }
    Ok(machine_from_json(&read(source)?)?)
}

/// Specification flags:
/// `reach:<props>`, `safe:<props>`, `ltl:<formula>`,
/// `discounted:<machine>:<gamma or per-state list>`, `limavg:<machine>`.
pub fn spec(flag: &str, mdp_props: &[String]) -> Result<Specification<f64>> {
    let (kind, rest) = flag.split_once(':').ok_or_else(|| anyhow!("specification `{flag}` has no kind"))?;
    let props = || rest.split(',').map(str::trim).filter(|p| !p.is_empty()).collect::<Vec<_>>();
    Ok(match kind {
        "reach" => Specification::reach(&props()),
        "safe" => Specification::safe(&props()),
        "ltl" => Specification::ltl(parse_ltl(rest, mdp_props)?),
        "discounted" => {
            let (m, g) = rest.rsplit_once(':').ok_or_else(|| anyhow!("discounted needs `<machine>:<gamma>`"))?;
            let g = numbers(g)?;
            let gamma = if g.len() == 1 { Discount::Constant(g[0]) } else { Discount::PerState(g) };
            Specification::DiscountedRm { machine: machine(m)?, gamma }
        }
        "limavg" => Specification::LimitAvgRm { machine: machine(rest)? },
        other => bail!("unknown specification kind `{other}`"),
    })
}

/// `uniform`, `actions:<a0,a1,...>` (one action per state), or a path to a
/// positional policy JSON file.
pub fn policy(source: &str, num_states: usize, num_actions: usize) -> Result<PositionalPolicy<f64>> {
    if source == "uniform" {
        return Ok(PositionalPolicy::uniform(num_states, num_actions));
    }
    if let Some(list) = source.strip_prefix("actions:") {
        let actions = list
            .split(',')
            .map(|a| a.trim().parse::<usize>().with_context(|| format!("`{a}` is not an action index")))
            .collect::<Result<Vec<_>>>()?;
        if actions.len() != num_states || actions.iter().any(|&a| a >= num_actions) {
            bail!("need one action below {num_actions} for each of the {num_states} states");
        }
        return Ok(PositionalPolicy::deterministic(num_actions, &actions));
    }
    let policy: PositionalPolicy<f64> = serde_json::from_str(&read(source)?)?;
    if policy.num_states() != num_states || policy.num_actions() != num_actions {
        bail!("policy shape does not match the model");
    }
    Ok(policy)
}
