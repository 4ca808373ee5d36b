import type { BehaviorEvent, Difficulty } from "./types.js";

export interface DemoQuestion {
  id: string;
  text: string;
  difficulty: Difficulty;
  answer: string;
}

/** Scripted demo questions over the bundled dataset (answers precomputed). */
export const DEMO_QUESTIONS: DemoQuestion[] = [
  { id: "q1", text: "How many parties form the highlighted clique?", difficulty: "low", answer: "4" },
  { id: "q2", text: "Which party placed the most calls? (id)", difficulty: "high", answer: "p1" },
  { id: "q3", text: "How many calls exceed 300 s?", difficulty: "high", answer: "10" },
  { id: "q4", text: "Is anyone in the clique incarcerated? (yes/no)", difficulty: "low", answer: "yes" },
];

/**
 * Question panel: shows one question at a time with a timer; emits
 * question_shown when displayed and answer_submitted on submit.
 */
export class QuestionPanel {
  private index = -1;
  private shownAt = 0;
  private questionEl: HTMLElement;
  private inputEl: HTMLInputElement;
  private badgeEl: HTMLElement;

  constructor(
    host: HTMLElement,
    private emit: (event: BehaviorEvent) => void,
    private questions: DemoQuestion[] = DEMO_QUESTIONS,
    private now: () => number = () => performance.now(),
  ) {
    const doc = host.ownerDocument;
    this.badgeEl = doc.createElement("span");
    this.badgeEl.className = "difficulty";
    this.questionEl = doc.createElement("p");
    this.questionEl.setAttribute("data-role", "question-text");
    this.inputEl = doc.createElement("input");
    this.inputEl.setAttribute("data-role", "answer");
    const submit = doc.createElement("button");
    submit.textContent = "Submit";
    submit.addEventListener("click", () => this.submit());
    host.append(this.badgeEl, this.questionEl, this.inputEl, submit);
  }

  get current(): DemoQuestion | null {
    return this.index >= 0 && this.index < this.questions.length
      ? this.questions[this.index]
      : null;
  }

  next(): DemoQuestion | null {
    this.index += 1;
    const q = this.current;
    if (q === null) {
      this.questionEl.textContent = "Done.";
      return null;
    }
    this.questionEl.textContent = q.text;
    this.badgeEl.textContent = q.difficulty;
    this.inputEl.value = "";
    this.shownAt = this.now();
    this.emit({ event: "question_shown", question_id: q.id, difficulty: q.difficulty });
    return q;
  }

  submit(): boolean | null {
    const q = this.current;
    if (q === null) return null;
    const correct =
      this.inputEl.value.trim().toLowerCase() === q.answer.toLowerCase();
    const rt = Math.max(this.now() - this.shownAt, 1);
    this.emit({
      event: "answer_submitted",
      question_id: q.id,
      correct,
      reaction_time_ms: rt,
    });
    this.next();
    return correct;
  }
}
