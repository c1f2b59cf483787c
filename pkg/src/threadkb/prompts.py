"""Prompt templates for the model-assisted pipeline stages.

Templates carry literal ``{SLOT}`` markers filled by :func:`fill`;
``str.format`` is avoided on purpose because the templates themselves
contain JSON braces. All model-facing behavior (category vocabulary,
token definitions, reply shapes) is pinned here so the rest of the code
treats replies as data.
"""

from __future__ import annotations


def fill(template: str, **slots: str) -> str:
    """Replace ``{NAME}`` markers; unknown markers are left untouched."""
    out = template
    for name, value in slots.items():
        out = out.replace("{" + name + "}", value)
    return out


# A compact built-in few-shot pair for reformulation; callers can swap in
# their own examples via the {EXAMPLES} slot.
DEFAULT_REFORMULATION_EXAMPLES = """\
Example input:
# How to Recover a Stuck Export Job
### Step 1: Confirm the job is stuck
Check the job dashboard. If the job shows no progress for 15 minutes it is stuck; \
kill it and move to resubmission. If it is progressing, just wait.
### Step 2: Resubmit the job
Resubmit with the original parameters.

Example output:
{
  "STEP": [
    {
      "prerequisite": "The job id is known.",
      "header": "Confirm the Export Job Is Stuck.",
      "body": "Check the job dashboard for the job id.",
      "linker": "If the job shows no progress for 15 minutes, then kill it and \
Resubmit the Export Job.[CONTINUE] Otherwise, wait for the job to finish.[MITIGATE]"
    },
    {
      "prerequisite": "The stuck job has been killed.",
      "header": "Resubmit the Export Job.",
      "body": "Resubmit the job with the original parameters.",
      "linker": "If the resubmitted job completes, then report the incident as \
resolved.[MITIGATE] Otherwise, escalate to the owning team.[MITIGATE]"
    }
  ]
}
"""

REFORMULATION_PROMPT = """\
You are a helpful troubleshooting guide assistant who helps the user formulate \
the manual unstructured troubleshooting guide <TSG> into a structured one. The \
<TSG> is in markdown format, with the first level header describing the incident \
or problem, and the following second level header providing information related \
to the incident or problem.

Each second-level subsection can be categorized into the following types: \
Terminology, FAQ, STEP, and Appendix. Your reformulation should strictly comply \
with the following definition:
- Terminology: firstly, it should be the relationship or connection between \
terminology about the incident, if not, it can be the explanation or concept of \
the incident. Sometimes it should be extracted and summarized by yourself.
- FAQ: frequently asked questions that help to understand the incident.
- STEP: the processes to resolve the incident, and you should make sure its \
completeness. Usually, steps have causal inner connection, the former step will \
trigger the next step.
- Appendix: the supplement of the incident that is not important or labeled by \
TSG, usually providing additional resources, data, links and so on.

1. You need to identify each second-level subsection, including third-level \
subsection if needed, analyze its content or purpose, and categorize it \
accordingly. For those belonging to Step, you should capture the inner \
connections, such as Causality or Temporal relations, and present them in the \
correct order.

2. Your returned formulated TSG should be in JSON format. Make sure that the \
keys originate from these categories: Terminology, FAQ, STEP and Appendix. Each \
value should be a list of dictionaries. The keys for them are "prerequisite", \
"header", "body", and "linker". All values within the lists need to align with \
the original context, with truthful meaning and necessary **code block**.

3. Importantly, the "linker" is used to imply the dual role of providing the \
action's result and connecting to the next step using the "if-then" sentence \
format. You should formulate each step's linker to be "If any results are \
obtained by executing the corresponding action in the previous step, then **the \
true intent of the following step** provided here". Implicit linkers like \
"proceed to the next step." or "then the intent of the following step should be \
taken into consideration." should be avoided.

4. For each "if" condition at every step in the STEP, it is necessary to add a \
special token behind the "then" condition within the "linker". The options for \
these tokens are "[CONTINUE]", "[CROSS]", and "[MITIGATE]".
- The token "[CONTINUE]" indicates that the actions corresponding to this "if" \
condition are part of the continuum within the same TSG's STEPs.
- The token "[CROSS]" signifies that the subsequent actions require a transition \
to a different set of steps that are external to the current TSG's STEPs.
- The token "[MITIGATE]" implies that the actions following the "if" condition \
convey that the incident is mitigated, or necessitate communication with on-call \
engineers or teams.

The use of this special token is instrumental in verifying the completeness and \
structural integrity of the STEP section.

{EXAMPLES}

Here is the <TSG> you need to formulate:
{TSG}
"""

REFINEMENT_PROMPT = """\
You previously reformulated a troubleshooting guide into the structured JSON \
format below. Compare the draft against the original <TSG> and repair it:
- add any section of the original that the draft omitted;
- fill in any missing or empty "prerequisite", "header", "body", or "linker" \
field using only information present in the original;
- remove nothing, and do not invent information that is not in the original.

Return the complete corrected JSON in the same format (keys from Terminology, \
FAQ, STEP and Appendix; values are lists of dictionaries with keys \
"prerequisite", "header", "body", and "linker").

Original <TSG>:
{TSG}

Draft reformulation:
{DRAFT}
"""

CODE_TEMPLATE_PROMPT = """\
You are a helpful assistant that extracts the code template and the default \
parameters from the provided code instance in <CODE>. <CODE> is a code block \
that contains several parameters. You should replace those parameters with \
placeholders and output the code template with placeholders and default \
parameters.

{EXAMPLES}

Your response should be in the JSON format as below:
{
    "#CODE_TEMPLATE#": where you replace the parameters in <CODE> with placeholders,
    "#DEFAULT_PARAMETERS#": where you keep the parameters in <CODE> as default values.
}

Here is the <CODE> you need to extract:
{CODE}
"""

LU_SELECTION_PROMPT = """\
You are a helpful assistant that selects the most relevant element from \
<LU_LIST> based on the user's query in <QUERY> and chat history in \
<CHAT_HISTORY>. Please respond with the JSON format.
Each element in <LU_LIST> is in json format and contains the following fields:

{
    "#type#": "the type of the element, select from the following types: Terminology, FAQ, Step, and Appendix.",
    "#meta data#": "the description of the troubleshooting guide.",
    "#prerequisite#": "The prerequisite of this step, before taking the current step, the prerequisites should be finished.",
    "#header#": "The information describes the intent of the <INFO>.",
    "#body#": "The action is the content which troubleshoots the incident or explain the #header#. the action may contain code blocks in markdown format, and parameters are replaced with placeholders",
    "#linker#": "the expected output after taking the #action#. It is defined in the following format in markdown: -If **condition**, then **should_do**. It can contain multiple if-then cases.",
    "#default_parameters#": "the default parameters that could fill in placeholders in code blocks in #body#."
}

- The elements in <LU_LIST> contain possible information that can answer the \
user's query in <QUERY>. However, they may not be all relevant to the query or \
useful to answer the user's query. You should select the most relevant element \
from the <LU_LIST> based on the user's query in <QUERY>.

- In particular, you should focus on the following fields in the element: \
#header#, #body#. Most importantly, the <QUERY> needs to match with the #header# \
and the #body# has to provide actions to reach the goal of the <QUERY>, please \
ignore the #linker# and do not map the <QUERY> with #linker#.

- As you choosing from <LU_LIST>, you need to check if all the #prerequisite# \
are met in previous history. If the #prerequisite# is not finished, then it \
should not be chosen.

- Try to select only one element from <LU_LIST>. If it is not possible to \
select only one element, you can select multiple elements from <LU_LIST>:
[
    {
        "INDEX": the index of the element in <LU_LIST>.
        "INTENT": the #header# of the element, the index starts from 0.
        "EXPLANATION": justify why you select this node.
    }
]
- If there is no element in <LU_LIST> that can answer the user's query in \
<QUERY>, you should try to select the most relevant element to the user's query \
considering that the user might use the wrong terminology:
[
    {
        "INDEX": the index of the element in <LU_LIST>.
        "INTENT": the #header# of the element, the index starts from 0.
        "REPHRASED_QUERY": the rephrased query that you think the user is asking about.
        "EXPLANATION": justify why you select this node.
    }
]
- Unless you are confident that there is no element in <LU_LIST> that is even \
close to the user's query:
{
    "NO_INFO_EXPLANATION": where you give your explanation.
}

- Your answer should be in the JSON format in a list after <RESPONSE>.

<LU_LIST>: {LU_LIST}

<QUERY>: {QUERY}

<CHAT_HISTORY>: {CHAT_HISTORY}
"""

BRANCH_MATCH_PROMPT = """\
You are given the outcome a user observed after executing a step, and the \
step's possible outcome branches. Each branch is an "If condition, then next \
intent" sentence. Pick the branch whose condition matches the observed outcome.

Branches (0-indexed):
{BRANCHES}

Observed outcome:
{OUTCOME}

Reply with JSON: {"BRANCH_INDEX": <index>} or {"BRANCH_INDEX": null} if no \
branch matches.
"""
