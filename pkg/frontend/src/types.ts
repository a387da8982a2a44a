// Wire types mirroring the annotation service's JSON payloads.

export type TaskStatus = "pending" | "labeled";

export interface TaskView {
  task_id: string;
  word: string;
  sense_id: string;
  predicted_definition: string;
  gold_definition: string | null;
  usage: string | null;
  model_tag: string;
  auto_circular: boolean;
  status: TaskStatus;
}

export interface TaskListPayload {
  tasks: TaskView[];
  pending: number;
  labeled: number;
}

export interface LabelPayload {
  task_id: string;
  fluency_issue: boolean;
  adequacy_issue: boolean;
  circular_override: boolean | null;
  annotator: string;
}

export interface ModelShares {
  model_tag: string;
  total_tasks: number;
  labeled_tasks: number;
  fluency_share: number | null;
  adequacy_share: number | null;
  circularity_share: number | null;
  formatted: {
    fluency: string | null;
    adequacy: string | null;
    circularity: string | null;
  };
}

export interface ReportPayload {
  models: Record<string, ModelShares>;
  labeled: number;
  total: number;
}
